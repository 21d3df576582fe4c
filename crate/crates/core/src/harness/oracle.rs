//! Offline validation oracle: the batch prediction-error cost at a frozen
//! parameter, and the time average of the online estimating vectors.

use crate::discretize::StepCache;
use crate::model::WienerModel;
use crate::predictor::{estimating_vector, PredictorConfig, PredictorState};
use crate::rng::CounterStreams;
use crate::truth::Dataset;
use crate::{Error, Result};

fn frozen_pass(
    model: &WienerModel,
    theta: &[f64],
    data: &Dataset,
    paths: usize,
    seed: u64,
    mut visit: impl FnMut(&crate::predictor::PredictionOutput),
) -> Result<()> {
    if data.is_empty() {
        return Err(Error::input("the dataset is empty"));
    }
    if paths == 0 {
        return Err(Error::input("need at least one Monte-Carlo path"));
    }
    if !model.constraints.contains(theta) {
        return Err(Error::input(format!(
            "theta {theta:?} violates {}",
            model.constraints.description()
        )));
    }
    let noise = CounterStreams::new(seed);
    let cfg = PredictorConfig { paths, stationary_init: false };
    let mut state = PredictorState::new(model, &cfg, data.input.clone(), theta, &noise)?;
    let mut cache = StepCache::new(64);
    for (input, y) in data.steps() {
        let step = cache.get_or_build(model, theta, input.delta, &data.input)?;
        let out = state.step(model, theta, &step, &input, y, &noise)?;
        visit(&out);
    }
    Ok(())
}

/// `V_N(θ) = (1/N) Σ ½ (y_k − ȳ_k(θ))²` with the frozen-parameter predictor.
pub fn offline_cost(
    model: &WienerModel,
    theta: &[f64],
    data: &Dataset,
    paths: usize,
    seed: u64,
) -> Result<f64> {
    let mut sum = 0.0;
    frozen_pass(model, theta, data, paths, seed, |out| sum += 0.5 * out.eps * out.eps)?;
    Ok(sum / data.len() as f64)
}

/// `(1/N) Σ ψ̄_k ε_k` at a frozen parameter.
pub fn mean_estimating_vector(
    model: &WienerModel,
    theta: &[f64],
    data: &Dataset,
    paths: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut sum = vec![0.0; model.dim()];
    frozen_pass(model, theta, data, paths, seed, |out| {
        for (s, v) in sum.iter_mut().zip(estimating_vector(out)) {
            *s += v;
        }
    })?;
    Ok(sum.into_iter().map(|s| s / data.len() as f64).collect())
}

/// Per-step estimating vectors at a frozen parameter.
pub fn estimating_vectors(
    model: &WienerModel,
    theta: &[f64],
    data: &Dataset,
    paths: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut all = Vec::with_capacity(data.len());
    frozen_pass(model, theta, data, paths, seed, |out| all.push(estimating_vector(out)))?;
    Ok(all)
}

/// Central finite-difference gradient of [`offline_cost`] with common random numbers.
pub fn cost_gradient_fd(
    model: &WienerModel,
    theta: &[f64],
    data: &Dataset,
    paths: usize,
    seed: u64,
    step: f64,
) -> Result<Vec<f64>> {
    (0..theta.len())
        .map(|j| {
            let mut up = theta.to_vec();
            up[j] += step;
            let mut dn = theta.to_vec();
            dn[j] -= step;
            let hi = offline_cost(model, &up, data, paths, seed)?;
            let lo = offline_cost(model, &dn, data, paths, seed)?;
            Ok((hi - lo) / (2.0 * step))
        })
        .collect()
}
