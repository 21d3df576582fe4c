//! A single online estimation run fed one sample at a time.

use super::config::{ExperimentConfig, RegressorInit};
use super::run::TrajectoryRow;
use crate::discretize::{InputMode, StepCache};
use crate::estimator::{DivergencePolicy, Estimator, EstimatorConfig};
use crate::model::{Plant, WienerModel};
use crate::predictor::{PredictorConfig, PredictorState, StepInput};
use crate::rng::CounterStreams;
use crate::{Error, Result};

/// Predictor, estimator and discretization cache of one run.
pub struct OnlineSession {
    model: WienerModel,
    input: InputMode,
    predictor_config: PredictorConfig,
    estimator_config: EstimatorConfig,
    noise: CounterStreams,
    theta0: Vec<f64>,
    predictor: PredictorState,
    estimator: Estimator,
    cache: StepCache,
    warmup: usize,
    seen: usize,
    resets: usize,
    t_prev: f64,
}

fn regressor_warmup(model: &WienerModel, init: RegressorInit) -> usize {
    match (init, &model.plant) {
        (RegressorInit::FromData, Plant::Transfer(p)) => p.order(),
        _ => 0,
    }
}

impl OnlineSession {
    pub fn new(
        config: &ExperimentConfig,
        model: WienerModel,
        input: InputMode,
        theta0: Vec<f64>,
        run_seed: u64,
    ) -> Result<Self> {
        let noise = CounterStreams::new(run_seed);
        let predictor_config =
            PredictorConfig { paths: config.effective_paths(), stationary_init: config.predictor.stationary_init };
        let estimator = Estimator::new(config.estimator.clone(), model.constraints.clone(), theta0.clone())?;
        let predictor = PredictorState::new(&model, &predictor_config, input.clone(), &theta0, &noise)?;
        Ok(Self {
            warmup: regressor_warmup(&model, config.predictor.regressor_init),
            model,
            input,
            predictor_config,
            estimator_config: config.estimator.clone(),
            noise,
            theta0,
            predictor,
            estimator,
            cache: StepCache::new(8),
            seen: 0,
            resets: 0,
            t_prev: 0.0,
        })
    }

    pub fn model(&self) -> &WienerModel {
        &self.model
    }

    pub fn theta(&self) -> &[f64] {
        self.estimator.theta()
    }

    pub fn theta0(&self) -> &[f64] {
        &self.theta0
    }

    pub fn samples_seen(&self) -> usize {
        self.seen
    }

    pub fn resets(&self) -> usize {
        self.resets
    }

    fn restart(&mut self) -> Result<()> {
        self.estimator = Estimator::new(self.estimator_config.clone(), self.model.constraints.clone(), self.theta0.clone())?;
        self.predictor =
            PredictorState::new(&self.model, &self.predictor_config, self.input.clone(), &self.theta0, &self.noise)?;
        self.resets += 1;
        Ok(())
    }

    /// Consumes the sample `(t_k, u_k, y_k)`.
    pub fn push(&mut self, t: f64, u: f64, y: f64) -> Result<TrajectoryRow> {
        if !(t > self.t_prev) {
            return Err(Error::input(format!("sample time {t} does not follow {}", self.t_prev)));
        }
        let input = StepInput { t_start: self.t_prev, delta: t - self.t_prev, held: u };
        let row = self.step(&input, y, t)?;
        self.t_prev = t;
        Ok(row)
    }

    /// One step with an explicit interval descriptor. Errors are divergences
    /// carrying the 1-based step index; under the reset policy the run restarts
    /// from `θ̂_0` and the row reports a NaN prediction error.
    pub fn step(&mut self, input: &StepInput, y: f64, t: f64) -> Result<TrajectoryRow> {
        self.seen += 1;
        let k = self.seen as u64;
        let theta = self.estimator.theta().to_vec();
        let outcome = self
            .cache
            .get_or_build(&self.model, &theta, input.delta, &self.input)
            .and_then(|step| self.predictor.step(&self.model, &theta, &step, input, y, &self.noise));
        let out = match outcome {
            Ok(out) => out,
            Err(err) => {
                if self.estimator_config.divergence == DivergencePolicy::Reset {
                    self.restart()?;
                    return Ok(TrajectoryRow { k, t, eps: f64::NAN, proj_hit: false, theta: self.theta0.clone() });
                }
                return Err(as_divergence(err, self.seen));
            }
        };
        let mut hit = false;
        if self.seen <= self.warmup {
            self.estimator.skip_step();
        } else {
            let before = self.estimator.resets();
            let snap = self.estimator.update(&out.psi_bar, out.eps).map_err(|e| as_divergence(e, self.seen))?;
            hit = snap.projection_hit;
            if self.estimator.resets() > before {
                self.resets += 1;
                self.predictor = PredictorState::new(
                    &self.model,
                    &self.predictor_config,
                    self.input.clone(),
                    &self.theta0,
                    &self.noise,
                )
                .map_err(|e| as_divergence(e, self.seen))?;
            }
        }
        Ok(TrajectoryRow { k, t, eps: out.eps, proj_hit: hit, theta: self.estimator.theta().to_vec() })
    }
}

fn as_divergence(err: Error, step: usize) -> Error {
    match err {
        Error::Divergence { reason, .. } => Error::Divergence { step, reason },
        other => Error::Divergence { step, reason: other.to_string() },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::reference::make_example2_model;
    use crate::truth::{gen_example2, Example2Truth};

    fn config() -> ExperimentConfig {
        ExperimentConfig::from_toml(
            r#"
schema_version = 1
seed = 1
replications = 1
samples = 50
[scenario]
example = "example2"
[estimator]
gain_exponent = 0.85
hessian_scale = 10.0
[predictor]
paths = 8
regressor_init = "from_data"
[initialization]
policy = "fixed"
theta = [1.0, 0.3, 1.1, 0.1, 1.5]
"#,
        )
        .unwrap()
    }

    #[test]
    fn push_matches_dataset_stepping() {
        let cfg = config();
        let data = gen_example2(&Example2Truth::default(), 50, 4).unwrap();
        let theta0 = vec![1.0, 0.3, 1.1, 0.1, 1.5];
        let mut a = OnlineSession::new(&cfg, make_example2_model(), InputMode::Hold, theta0.clone(), 9).unwrap();
        let mut b = OnlineSession::new(&cfg, make_example2_model(), InputMode::Hold, theta0, 9).unwrap();
        for ((input, y), r) in data.steps().zip(&data.records) {
            let x = a.push(r.t_k, r.u_k, r.y_k).unwrap();
            let z = b.step(&input, y, r.t_k).unwrap();
            assert_eq!(x, z);
        }
        assert_eq!(a.samples_seen(), 50);
    }

    #[test]
    fn warm_up_keeps_the_initial_estimate() {
        let cfg = config();
        let theta0 = vec![1.0, 0.3, 1.1, 0.1, 1.5];
        let mut s = OnlineSession::new(&cfg, make_example2_model(), InputMode::Hold, theta0.clone(), 9).unwrap();
        assert_eq!(s.push(0.5, 5.0, 0.2).unwrap().theta, theta0);
        assert_eq!(s.push(1.0, 5.0, 0.2).unwrap().theta, theta0);
        assert_ne!(s.push(1.5, -5.0, 0.2).unwrap().theta, theta0);
    }

    #[test]
    fn rejects_non_increasing_time() {
        let cfg = config();
        let mut s =
            OnlineSession::new(&cfg, make_example2_model(), InputMode::Hold, vec![1.0, 0.3, 1.1, 0.1, 1.5], 9).unwrap();
        s.push(0.5, 1.0, 0.0).unwrap();
        assert!(matches!(s.push(0.5, 1.0, 0.0), Err(Error::InvalidInput(_))));
    }
}
