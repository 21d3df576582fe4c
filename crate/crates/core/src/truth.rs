//! Ground-truth data for the two reference studies, plus a fine-grid
//! Euler–Maruyama integrator used to validate the exact discretizations.
//!
//! Generators are iterators over [`DataRecord`]s. Record `k` carries the sample
//! time `t_k`, the input held on `[t_{k-1}, t_k)` (or the sampled value `u(t_k)`
//! for multisine inputs) and the measured output `y_k`. Time starts at `t_0 = 0`
//! with the plant at rest.

use std::f64::consts::PI;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::discretize::{controllable_realization, exo_discretize, zoh_matrices, InputMode};
use crate::model::{DisturbanceSde, Multisine, TransferOperator};
use crate::predictor::StepInput;
use crate::rng::{stream, Channel};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataRecord {
    pub k: u64,
    pub t_k: f64,
    pub u_k: f64,
    pub y_k: f64,
}

/// Sampled data plus the inter-sample input description the predictor needs.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub input: InputMode,
    pub records: Vec<DataRecord>,
}

/// Shortest representation that reads back to the same `f64`, never fewer than
/// 12 significant digits when the value is not exactly representable in fewer.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl Dataset {
    pub fn new(input: InputMode, records: Vec<DataRecord>) -> Result<Self> {
        let mut prev = 0.0;
        for r in &records {
            if !(r.t_k > prev) {
                return Err(Error::input(format!("sample times must increase strictly (record {})", r.k)));
            }
            if !r.y_k.is_finite() || !r.u_k.is_finite() {
                return Err(Error::input(format!("record {} is not finite", r.k)));
            }
            prev = r.t_k;
        }
        Ok(Self { input, records })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Interval descriptors and outputs in predictor order.
    pub fn steps(&self) -> impl Iterator<Item = (StepInput, f64)> + '_ {
        let mut t_prev = 0.0;
        self.records.iter().map(move |r| {
            let input = StepInput { t_start: t_prev, delta: r.t_k - t_prev, held: r.u_k };
            t_prev = r.t_k;
            (input, r.y_k)
        })
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "t_k", "u_k", "y_k"])?;
        for r in &self.records {
            w.write_record([r.k.to_string(), format_float(r.t_k), format_float(r.u_k), format_float(r.y_k)])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads `k,t_k,u_k,y_k` rows; the inter-sample input law is supplied separately.
    pub fn read_csv<R: Read>(reader: R, input: InputMode) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["k", "t_k", "u_k", "y_k"] {
            return Err(Error::input(format!("unexpected dataset header {headers:?}")));
        }
        let records = rdr.deserialize().collect::<std::result::Result<Vec<DataRecord>, _>>()?;
        Self::new(input, records)
    }
}

/// Stationary Ornstein–Uhlenbeck `dξ = drift·ξ dt + diffusion dβ` with `drift < 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuParams {
    #[serde(default = "default_ou_drift")]
    pub drift: f64,
    #[serde(default = "default_ou_diffusion")]
    pub diffusion: f64,
}

fn default_ou_drift() -> f64 {
    -0.75
}

fn default_ou_diffusion() -> f64 {
    1.5
}

impl Default for OuParams {
    fn default() -> Self {
        Self { drift: default_ou_drift(), diffusion: default_ou_diffusion() }
    }
}

impl OuParams {
    pub fn stationary_variance(&self) -> f64 {
        self.diffusion * self.diffusion / (-2.0 * self.drift)
    }
}

fn default_mixture_probability() -> f64 {
    0.2
}

fn default_mixture_spread() -> f64 {
    0.5
}

fn default_true() -> bool {
    true
}

/// Additive disturbance of the second study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceCase {
    /// `w = ξ`.
    Case1 {
        #[serde(default)]
        ou: OuParams,
    },
    /// `w_k = ξ_k ρ_k`, `ρ_k ~ U(0, 1)`.
    Case2 {
        #[serde(default)]
        ou: OuParams,
    },
    /// `w_k = ξ_k`, replaced with probability `probability` by an independent
    /// `N(0, spread)` draw (`spread` is a variance unless `spread_is_variance = false`).
    Case3 {
        #[serde(default)]
        ou: OuParams,
        #[serde(default = "default_mixture_probability")]
        probability: f64,
        #[serde(default = "default_mixture_spread")]
        spread: f64,
        #[serde(default = "default_true")]
        spread_is_variance: bool,
    },
    /// `dw = σ dβ`, `w(0) = 0`: the disturbance law the estimated model assumes.
    Brownian { sigma: f64 },
    None,
}

impl DisturbanceCase {
    pub fn case1() -> Self {
        DisturbanceCase::Case1 { ou: OuParams::default() }
    }

    pub fn case2() -> Self {
        DisturbanceCase::Case2 { ou: OuParams::default() }
    }

    pub fn case3() -> Self {
        DisturbanceCase::Case3 {
            ou: OuParams::default(),
            probability: default_mixture_probability(),
            spread: default_mixture_spread(),
            spread_is_variance: true,
        }
    }

    /// Case by number 1..=3.
    pub fn numbered(case: u32) -> Result<Self> {
        match case {
            1 => Ok(Self::case1()),
            2 => Ok(Self::case2()),
            3 => Ok(Self::case3()),
            other => Err(Error::input(format!("unknown disturbance case {other}"))),
        }
    }

    fn validate(&self) -> Result<()> {
        let ou_ok = |ou: &OuParams| ou.drift < 0.0 && ou.diffusion >= 0.0;
        let ok = match self {
            DisturbanceCase::Case1 { ou } | DisturbanceCase::Case2 { ou } => ou_ok(ou),
            DisturbanceCase::Case3 { ou, probability, spread, .. } => {
                ou_ok(ou) && (0.0..=1.0).contains(probability) && *spread >= 0.0
            }
            DisturbanceCase::Brownian { sigma } => sigma.is_finite(),
            DisturbanceCase::None => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid disturbance case {self:?}")))
        }
    }
}

/// Sample-by-sample disturbance generator.
#[derive(Clone, Debug)]
pub struct DisturbanceProcess {
    case: DisturbanceCase,
    xi: f64,
    w: f64,
    gauss: ChaCha8Rng,
    mixture: ChaCha8Rng,
}

impl DisturbanceProcess {
    pub fn new(case: DisturbanceCase, seed: u64) -> Result<Self> {
        case.validate()?;
        let mut gauss = stream(seed, Channel::TruthDisturbance, 0, 0);
        let xi = match &case {
            DisturbanceCase::Case1 { ou } | DisturbanceCase::Case2 { ou } | DisturbanceCase::Case3 { ou, .. } => {
                ou.stationary_variance().sqrt() * gauss.sample::<f64, _>(StandardNormal)
            }
            _ => 0.0,
        };
        Ok(Self { case, xi, w: 0.0, gauss, mixture: stream(seed, Channel::TruthMixture, 0, 0) })
    }

    fn advance_ou(&mut self, ou: OuParams, delta: f64) {
        let phi = (ou.drift * delta).exp();
        let q = ou.stationary_variance() * (1.0 - phi * phi);
        let n: f64 = self.gauss.sample(StandardNormal);
        self.xi = phi * self.xi + q.sqrt() * n;
    }

    /// `w(t_k)` after an interval of length `delta`.
    pub fn next(&mut self, delta: f64) -> f64 {
        self.w = match self.case.clone() {
            DisturbanceCase::Case1 { ou } => {
                self.advance_ou(ou, delta);
                self.xi
            }
            DisturbanceCase::Case2 { ou } => {
                self.advance_ou(ou, delta);
                self.xi * self.mixture.random::<f64>()
            }
            DisturbanceCase::Case3 { ou, probability, spread, spread_is_variance } => {
                self.advance_ou(ou, delta);
                let replace = self.mixture.random::<f64>() < probability;
                let n: f64 = self.mixture.sample(StandardNormal);
                if replace {
                    let std = if spread_is_variance { spread.sqrt() } else { spread };
                    std * n
                } else {
                    self.xi
                }
            }
            DisturbanceCase::Brownian { sigma } => {
                let n: f64 = self.gauss.sample(StandardNormal);
                self.w + sigma * delta.sqrt() * n
            }
            DisturbanceCase::None => 0.0,
        };
        self.w
    }
}

/// Maximal-length PRBS from the 31-bit recurrence `s_{n} = s_{n-28} ⊕ s_{n-31}`.
#[derive(Clone, Debug)]
pub struct Prbs {
    register: u32,
    amplitude: f64,
}

impl Prbs {
    pub fn new(seed: u64, amplitude: f64) -> Self {
        let mut register = (crate::rng::mix64(seed) & 0x7fff_ffff) as u32;
        if register == 0 {
            register = 1;
        }
        Self { register, amplitude }
    }

    pub fn next_chip(&mut self) -> f64 {
        let bit = ((self.register >> 30) ^ (self.register >> 27)) & 1;
        self.register = ((self.register << 1) | bit) & 0x7fff_ffff;
        if bit == 1 {
            self.amplitude
        } else {
            -self.amplitude
        }
    }
}

fn default_e1_a() -> f64 {
    -1.0
}
fn one() -> f64 {
    1.0
}
fn default_amplitude() -> f64 {
    6.0
}
fn default_components() -> usize {
    10
}
fn default_grid_step() -> f64 {
    PI / 5.0
}
fn default_grid_size() -> usize {
    50
}
fn default_delta_min() -> f64 {
    0.5
}
fn default_e1_noise() -> f64 {
    0.01
}

/// `dx = a x dt + b u dt + σ dβ`, `y = x² + v`, multisine input, random sampling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example1Truth {
    #[serde(default = "default_e1_a")]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_components")]
    pub components: usize,
    /// Frequencies are drawn from `{grid_step, 2·grid_step, …, grid_size·grid_step}`.
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
    #[serde(default = "default_delta_min")]
    pub delta_min: f64,
    #[serde(default = "one")]
    pub delta_max: f64,
    #[serde(default = "default_e1_noise")]
    pub noise_std: f64,
}

impl Default for Example1Truth {
    fn default() -> Self {
        Self {
            a: -1.0,
            b: 1.0,
            sigma: 1.0,
            amplitude: default_amplitude(),
            components: default_components(),
            grid_step: default_grid_step(),
            grid_size: default_grid_size(),
            delta_min: default_delta_min(),
            delta_max: 1.0,
            noise_std: default_e1_noise(),
        }
    }
}

impl Example1Truth {
    pub fn validate(&self) -> Result<()> {
        if !(self.a < 0.0) {
            return Err(Error::Config("the true pole must be negative".into()));
        }
        if self.components > self.grid_size {
            return Err(Error::Config("more sinusoids than grid frequencies".into()));
        }
        if !(self.delta_min > 0.0 && self.delta_max >= self.delta_min) {
            return Err(Error::Config("sampling interval bounds must satisfy 0 < min <= max".into()));
        }
        if !(self.noise_std >= 0.0) {
            return Err(Error::Config("noise std must be non-negative".into()));
        }
        Ok(())
    }

    /// Multisine with frequencies drawn without replacement from the grid (sorted
    /// ascending) and Schroeder phases `ℓ(ℓ-1)π/L`.
    pub fn multisine(&self, seed: u64) -> Multisine {
        let mut rng = stream(seed, Channel::TruthInput, 0, 0);
        let mut freqs: Vec<f64> = sample(&mut rng, self.grid_size, self.components)
            .into_iter()
            .map(|i| (i + 1) as f64 * self.grid_step)
            .collect();
        freqs.sort_by(f64::total_cmp);
        let l_total = self.components as f64;
        let phases = (1..=self.components)
            .map(|l| (l * (l - 1)) as f64 * PI / l_total)
            .collect();
        Multisine {
            amplitudes: vec![self.amplitude; self.components],
            frequencies: freqs,
            phases,
        }
    }
}

/// Iterator over first-study records.
pub struct Example1Generator {
    truth: Example1Truth,
    input: Multisine,
    drift: DMatrix<f64>,
    gain: DMatrix<f64>,
    dispersion: DMatrix<f64>,
    x: DVector<f64>,
    t: f64,
    k: u64,
    remaining: usize,
    sampling: ChaCha8Rng,
    disturbance: ChaCha8Rng,
    noise: ChaCha8Rng,
}

impl Example1Generator {
    pub fn new(truth: Example1Truth, n: usize, seed: u64) -> Result<Self> {
        truth.validate()?;
        let input = truth.multisine(seed);
        Ok(Self {
            drift: DMatrix::from_element(1, 1, truth.a),
            gain: DMatrix::from_element(1, 1, truth.b),
            dispersion: DMatrix::from_element(1, 1, truth.sigma),
            truth,
            input,
            x: DVector::zeros(1),
            t: 0.0,
            k: 0,
            remaining: n,
            sampling: stream(seed, Channel::TruthSampling, 0, 0),
            disturbance: stream(seed, Channel::TruthDisturbance, 0, 0),
            noise: stream(seed, Channel::TruthNoise, 0, 0),
        })
    }

    pub fn input(&self) -> &Multisine {
        &self.input
    }

    fn advance(&mut self) -> Result<DataRecord> {
        let delta = if self.truth.delta_max > self.truth.delta_min {
            self.sampling.random_range(self.truth.delta_min..self.truth.delta_max)
        } else {
            self.truth.delta_min
        };
        let step = exo_discretize(&self.drift, &self.gain, &self.dispersion, &self.input, self.t, delta)?;
        let xi: f64 = self.disturbance.sample(StandardNormal);
        self.x = step.mean(&self.x) + &step.b_delta * DVector::from_element(1, xi);
        self.t += delta;
        self.k += 1;
        let v: f64 = self.noise.sample(StandardNormal);
        Ok(DataRecord {
            k: self.k,
            t_k: self.t,
            u_k: self.input.value(self.t),
            y_k: self.x[0] * self.x[0] + self.truth.noise_std * v,
        })
    }
}

impl Iterator for Example1Generator {
    type Item = Result<DataRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        Some(self.advance())
    }
}

fn default_e2_a() -> f64 {
    1.2
}
fn default_e2_b() -> f64 {
    0.27
}
fn default_alpha() -> f64 {
    1.7
}
fn default_e2_delta() -> f64 {
    0.5
}
fn default_e2_noise() -> f64 {
    0.05
}
fn default_prbs() -> f64 {
    5.0
}
fn default_case() -> DisturbanceCase {
    DisturbanceCase::case1()
}

/// `x = c/(p² + a p + b) u + w`, `y = 1/(1 + |x|^α) + v`, PRBS input, fixed Δ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Example2Truth {
    #[serde(default = "default_e2_a")]
    pub a: f64,
    #[serde(default = "default_e2_b")]
    pub b: f64,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_case")]
    pub disturbance: DisturbanceCase,
    #[serde(default = "default_e2_delta")]
    pub delta: f64,
    #[serde(default = "default_e2_noise")]
    pub noise_std: f64,
    #[serde(default = "default_prbs")]
    pub prbs_amplitude: f64,
}

impl Default for Example2Truth {
    fn default() -> Self {
        Self {
            a: 1.2,
            b: 0.27,
            c: 1.0,
            alpha: 1.7,
            disturbance: DisturbanceCase::case1(),
            delta: 0.5,
            noise_std: 0.05,
            prbs_amplitude: 5.0,
        }
    }
}

impl Example2Truth {
    pub fn with_case(case: DisturbanceCase) -> Self {
        Self { disturbance: case, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a > 0.0 && self.b > 0.0) {
            return Err(Error::Config("the true plant must be stable (a > 0, b > 0)".into()));
        }
        if !(self.alpha > 1.0) {
            return Err(Error::Config("the true Hill coefficient must exceed 1".into()));
        }
        if !(self.delta > 0.0) || !(self.noise_std >= 0.0) {
            return Err(Error::Config("need a positive interval and non-negative noise".into()));
        }
        self.disturbance.validate()
    }
}

/// Iterator over second-study records.
pub struct Example2Generator {
    truth: Example2Truth,
    phi: DMatrix<f64>,
    gamma: DMatrix<f64>,
    out: DMatrix<f64>,
    state: DVector<f64>,
    prbs: Prbs,
    disturbance: DisturbanceProcess,
    noise: ChaCha8Rng,
    k: u64,
    remaining: usize,
}

impl Example2Generator {
    pub fn new(truth: Example2Truth, n: usize, seed: u64) -> Result<Self> {
        truth.validate()?;
        let op = TransferOperator::new(vec![truth.c], vec![truth.b, truth.a])?;
        let (a, b, c) = controllable_realization(&op)?;
        let (phi, gamma) = zoh_matrices(&a, &b, truth.delta);
        Ok(Self {
            phi,
            gamma,
            out: c,
            state: DVector::zeros(2),
            prbs: Prbs::new(crate::rng::derive_seed(&[seed, Channel::TruthInput as u64]), truth.prbs_amplitude),
            disturbance: DisturbanceProcess::new(truth.disturbance.clone(), seed)?,
            noise: stream(seed, Channel::TruthNoise, 0, 0),
            truth,
            k: 0,
            remaining: n,
        })
    }

    fn advance(&mut self) -> DataRecord {
        let u = self.prbs.next_chip();
        self.state = &self.phi * &self.state + &self.gamma * u;
        let z = (&self.out * &self.state)[0];
        let w = self.disturbance.next(self.truth.delta);
        let x = z + w;
        let v: f64 = self.noise.sample(StandardNormal);
        self.k += 1;
        DataRecord {
            k: self.k,
            t_k: self.k as f64 * self.truth.delta,
            u_k: u,
            y_k: 1.0 / (1.0 + x.abs().powf(self.truth.alpha)) + self.truth.noise_std * v,
        }
    }
}

impl Iterator for Example2Generator {
    type Item = Result<DataRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        Some(Ok(self.advance()))
    }
}

pub fn gen_example1(truth: &Example1Truth, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::input("need at least one sample"));
    }
    let generator = Example1Generator::new(truth.clone(), n, seed)?;
    let input = InputMode::Exosystem(generator.input().clone());
    let records = generator.collect::<Result<Vec<_>>>()?;
    Dataset::new(input, records)
}

pub fn gen_example2(truth: &Example2Truth, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::input("need at least one sample"));
    }
    let records = Example2Generator::new(truth.clone(), n, seed)?.collect::<Result<Vec<_>>>()?;
    Dataset::new(InputMode::Hold, records)
}

/// Either reference study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "example", rename_all = "snake_case")]
pub enum TruthScenario {
    Example1(Example1Truth),
    Example2(Example2Truth),
}

impl TruthScenario {
    pub fn validate(&self) -> Result<()> {
        match self {
            TruthScenario::Example1(t) => t.validate(),
            TruthScenario::Example2(t) => t.validate(),
        }
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        match self {
            TruthScenario::Example1(t) => gen_example1(t, n, seed),
            TruthScenario::Example2(t) => gen_example2(t, n, seed),
        }
    }

    /// Inter-sample input law of the data generated under `seed`.
    pub fn input_mode(&self, seed: u64) -> InputMode {
        match self {
            TruthScenario::Example1(t) => InputMode::Exosystem(t.multisine(seed)),
            TruthScenario::Example2(_) => InputMode::Hold,
        }
    }
}

/// Euler–Maruyama path of `dw = A w dt + B dβ` on the grid `0, dt, …, steps·dt`.
pub fn euler_maruyama_ref(
    sde: &DisturbanceSde,
    theta: &[f64],
    x0: &[f64],
    dt: f64,
    steps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut path = Vec::with_capacity(steps + 1);
    euler_maruyama_with(sde, theta, x0, dt, steps, seed, |x| path.push(x.to_vec()))?;
    Ok(path)
}

/// Terminal state of the same scheme without storing the path.
pub fn euler_maruyama_terminal(
    sde: &DisturbanceSde,
    theta: &[f64],
    x0: &[f64],
    dt: f64,
    steps: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut last = x0.to_vec();
    euler_maruyama_with(sde, theta, x0, dt, steps, seed, |x| last.copy_from_slice(x))?;
    Ok(last)
}

fn euler_maruyama_with(
    sde: &DisturbanceSde,
    theta: &[f64],
    x0: &[f64],
    dt: f64,
    steps: usize,
    seed: u64,
    mut visit: impl FnMut(&[f64]),
) -> Result<()> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::input(format!("time step must be positive, got {dt}")));
    }
    let n = sde.state_dim();
    if x0.len() != n {
        return Err(Error::input(format!("initial state has {} entries, expected {n}", x0.len())));
    }
    let a = sde.a(theta);
    let b = sde.b(theta) * dt.sqrt();
    let p = b.ncols();
    let mut rng = rand::rngs::SmallRng::seed_from_u64(seed);
    let mut x = x0.to_vec();
    let mut next = vec![0.0; n];
    let mut db = vec![0.0; p];
    visit(&x);
    for _ in 0..steps {
        for v in db.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for i in 0..n {
            let mut acc = x[i];
            for j in 0..n {
                acc += a[(i, j)] * x[j] * dt;
            }
            for j in 0..p {
                acc += b[(i, j)] * db[j];
            }
            next[i] = acc;
        }
        std::mem::swap(&mut x, &mut next);
        visit(&x);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AffineMap;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn silent_first_study_outputs_zero() {
        let truth = Example1Truth { sigma: 0.0, noise_std: 0.0, amplitude: 0.0, ..Default::default() };
        let data = gen_example1(&truth, 50, 3).unwrap();
        assert!(data.records.iter().all(|r| r.y_k == 0.0));
    }

    /// RK4 on a fine grid of `ẋ = a x + b u(t)`.
    fn rk4(a: f64, b: f64, u: &Multisine, t_end: f64, h: f64, x0: f64, t0: f64) -> f64 {
        let f = |t: f64, x: f64| a * x + b * u.value(t);
        let steps = ((t_end - t0) / h).round() as usize;
        let h = (t_end - t0) / steps as f64;
        let (mut t, mut x) = (t0, x0);
        for _ in 0..steps {
            let k1 = f(t, x);
            let k2 = f(t + h / 2.0, x + h / 2.0 * k1);
            let k3 = f(t + h / 2.0, x + h / 2.0 * k2);
            let k4 = f(t + h, x + h * k3);
            x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
            t += h;
        }
        x
    }

    #[test]
    fn noise_free_first_study_matches_fine_grid_integration() {
        let truth = Example1Truth { sigma: 0.0, noise_std: 0.0, ..Default::default() };
        let data = gen_example1(&truth, 12, 17).unwrap();
        let InputMode::Exosystem(ms) = &data.input else { panic!() };
        let (mut x, mut t) = (0.0, 0.0);
        for r in &data.records {
            x = rk4(-1.0, 1.0, ms, r.t_k, 1e-4, x, t);
            t = r.t_k;
            assert!((r.y_k - x * x).abs() < 1e-8, "{} vs {}", r.y_k, x * x);
        }
    }

    #[test]
    fn sampling_intervals_average_three_quarters() {
        let data = gen_example1(&Example1Truth::default(), 10_000, 5).unwrap();
        let mean = data.records.last().unwrap().t_k / 10_000.0;
        assert!((mean - 0.75).abs() < 0.01);
        let deltas: Vec<f64> = data.steps().map(|(s, _)| s.delta).collect();
        assert!(deltas.iter().all(|d| (0.5..1.0).contains(d)));
    }

    #[test]
    fn multisine_design() {
        let truth = Example1Truth::default();
        let ms = truth.multisine(9);
        assert_eq!(ms.len(), 10);
        assert!(ms.amplitudes.iter().all(|&a| a == 6.0));
        for w in ms.frequencies.windows(2) {
            assert!(w[1] > w[0]);
        }
        for f in &ms.frequencies {
            let idx = f / (PI / 5.0);
            assert!((idx - idx.round()).abs() < 1e-9 && (1.0..=50.0).contains(&idx.round()));
        }
        assert_eq!(ms.phases[0], 0.0);
        assert!((ms.phases[1] - 0.2 * PI).abs() < 1e-15);
        assert!((ms.phases[9] - 9.0 * PI).abs() < 1e-12);
        assert_ne!(truth.multisine(9).frequencies, truth.multisine(10).frequencies);
    }

    #[test]
    fn ou_stationary_variance() {
        let mut p = DisturbanceProcess::new(DisturbanceCase::case1(), 21).unwrap();
        let xs: Vec<f64> = (0..100_000).map(|_| p.next(0.5)).collect();
        let (_, var) = mean_var(&xs);
        assert!((var / 1.5 - 1.0).abs() < 0.03, "{var}");
    }

    #[test]
    fn scaled_uniform_second_moment() {
        let mut p = DisturbanceProcess::new(DisturbanceCase::case2(), 22).unwrap();
        let m2 = (0..100_000).map(|_| p.next(0.5).powi(2)).sum::<f64>() / 1e5;
        assert!((m2 / 0.5 - 1.0).abs() < 0.05, "{m2}");
    }

    #[test]
    fn mixture_second_moment() {
        // 0.8 · 1.5 + 0.2 · 0.5 = 1.3
        let mut p = DisturbanceProcess::new(DisturbanceCase::case3(), 23).unwrap();
        let m2 = (0..100_000).map(|_| p.next(0.5).powi(2)).sum::<f64>() / 1e5;
        assert!((m2 / 1.3 - 1.0).abs() < 0.05, "{m2}");
    }

    #[test]
    fn quiet_second_study_sits_at_hill_peak() {
        let truth = Example2Truth {
            disturbance: DisturbanceCase::None,
            noise_std: 0.0,
            prbs_amplitude: 0.0,
            ..Default::default()
        };
        let data = gen_example2(&truth, 30, 1).unwrap();
        assert!(data.records.iter().all(|r| r.y_k == 1.0));
    }

    #[test]
    fn second_study_plant_matches_difference_equation() {
        let truth = Example2Truth {
            disturbance: DisturbanceCase::None,
            noise_std: 0.0,
            ..Default::default()
        };
        let data = gen_example2(&truth, 60, 4).unwrap();
        let op = TransferOperator::new(vec![1.0], vec![0.27, 1.2]).unwrap();
        let arx = crate::discretize::zoh_discretize(&op, 0.5).unwrap();
        let inputs: Vec<f64> = data.records.iter().map(|r| r.u_k).collect();
        for (r, z) in data.records.iter().zip(arx.simulate(&inputs)) {
            let y = 1.0 / (1.0 + z.abs().powf(1.7));
            assert!((r.y_k - y).abs() < 1e-12);
        }
    }

    #[test]
    fn prbs_is_balanced_binary() {
        let mut p = Prbs::new(77, 5.0);
        let chips: Vec<f64> = (0..20_000).map(|_| p.next_chip()).collect();
        assert!(chips.iter().all(|c| c.abs() == 5.0));
        let mean = chips.iter().sum::<f64>() / chips.len() as f64;
        assert!(mean.abs() < 0.2);
        let switches = chips.windows(2).filter(|w| w[0] != w[1]).count();
        assert!((switches as f64 / 20_000.0 - 0.5).abs() < 0.03);
    }

    #[test]
    fn generation_is_reproducible() {
        let t = Example2Truth::with_case(DisturbanceCase::case3());
        assert_eq!(gen_example2(&t, 100, 8).unwrap(), gen_example2(&t, 100, 8).unwrap());
        assert_ne!(gen_example2(&t, 100, 8).unwrap(), gen_example2(&t, 100, 9).unwrap());
        let e = Example1Truth::default();
        assert_eq!(gen_example1(&e, 50, 8).unwrap(), gen_example1(&e, 50, 8).unwrap());
    }

    #[test]
    fn unknown_case_is_rejected() {
        assert!(DisturbanceCase::numbered(4).is_err());
        assert!(DisturbanceCase::numbered(2).is_ok());
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let data = gen_example2(&Example2Truth::default(), 40, 2).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("k,t_k,u_k,y_k\n"));
        let back = Dataset::read_csv(buf.as_slice(), InputMode::Hold).unwrap();
        assert_eq!(back, data);
    }

    #[test]
    fn csv_rejects_bad_rows() {
        let bad = "k,t_k,u_k,y_k\n1,0.5,1,0.2\n2,0.5,1,0.3\n";
        assert!(Dataset::read_csv(bad.as_bytes(), InputMode::Hold).is_err());
        let header = "k,t,u,y\n1,0.5,1,0.2\n";
        assert!(Dataset::read_csv(header.as_bytes(), InputMode::Hold).is_err());
    }

    fn scalar_sde(a: f64, b: f64) -> DisturbanceSde {
        DisturbanceSde::new(
            AffineMap::constant(DMatrix::from_element(1, 1, a)),
            AffineMap::constant(DMatrix::from_element(1, 1, b)),
            AffineMap::constant(DMatrix::from_element(1, 1, 1.0)),
        )
    }

    #[test]
    fn euler_maruyama_constant_without_dynamics() {
        let path = euler_maruyama_ref(&scalar_sde(0.0, 0.0), &[], &[2.5], 0.01, 100, 1).unwrap();
        assert_eq!(path.len(), 101);
        assert!(path.iter().all(|x| x[0] == 2.5));
    }

    #[test]
    fn euler_maruyama_terminal_variance_matches_exact_step() {
        // 2·10^4 paths of 2·10^3 steps from rest over T = 2
        let sde = scalar_sde(-0.75, 1.5);
        let finals: Vec<f64> = (0..20_000)
            .map(|s| euler_maruyama_terminal(&sde, &[], &[0.0], 1e-3, 2000, s).unwrap()[0])
            .collect();
        let (_, var) = mean_var(&finals);
        let exact = 1.5 * (1.0 - (-1.5f64 * 2.0).exp());
        // relative standard error of a sample variance is sqrt(2/n) = 1%
        assert!((var / exact - 1.0).abs() < 0.04, "{var} vs {exact}");
    }

    #[test]
    fn euler_maruyama_mean_is_stable_under_refinement() {
        let sde = scalar_sde(-0.75, 1.5);
        let mean = |dt: f64, steps: usize| {
            (0..4000).map(|s| euler_maruyama_terminal(&sde, &[], &[2.0], dt, steps, s).unwrap()[0]).sum::<f64>()
                / 4000.0
        };
        let coarse = mean(2e-3, 500);
        let fine = mean(1e-3, 1000);
        // exact mean 2e^{-0.75}; per-path std about 1.1
        let se = 1.2 / (4000f64).sqrt();
        assert!((coarse - fine).abs() < 3.0 * std::f64::consts::SQRT_2 * se);
    }
}
