//! Counter-based random streams.
//!
//! Every draw is addressed by `(seed, channel, k, m)`: the stream for that address
//! is a ChaCha8 generator keyed by a hash of the tuple. Nothing is stored between
//! steps, draws can be regenerated on demand (common random numbers for finite
//! differences), and separate channels never share state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Stream labels. Truth generation and the predictor never share a label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(u64)]
pub enum Channel {
    TruthInput = 1,
    TruthSampling = 2,
    TruthDisturbance = 3,
    TruthNoise = 4,
    TruthMixture = 5,
    PredictorY = 16,
    PredictorPsi = 17,
    Init = 32,
}

impl Channel {
    pub fn is_truth(self) -> bool {
        (self as u64) < 16
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hash of a sequence of words, order-sensitive.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x243f_6a88_85a3_08d3, |acc, &p| mix64(acc ^ mix64(p)))
}

/// Seed of replication `r` under a base seed.
pub fn replication_seed(base_seed: u64, replication: usize) -> u64 {
    derive_seed(&[base_seed, replication as u64, 0x7265_706c])
}

/// The generator addressed by `(seed, channel, k, m)`.
pub fn stream(seed: u64, channel: Channel, k: u64, m: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(&[seed, channel as u64, k, m]))
}

/// Source of standard normal vectors addressed by channel, step and path.
pub trait NoiseSource: Send + Sync {
    fn fill_normals(&self, channel: Channel, k: u64, m: u64, out: &mut [f64]);
}

/// The production [`NoiseSource`]: one counter-based stream per address.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterStreams {
    pub seed: u64,
}

impl CounterStreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl NoiseSource for CounterStreams {
    fn fill_normals(&self, channel: Channel, k: u64, m: u64, out: &mut [f64]) {
        let mut rng = stream(self.seed, channel, k, m);
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    }
}
