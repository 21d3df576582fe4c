//! Statistical and end-to-end checks of the predictor and the offline cost.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use wiener_core::discretize::{DiscretizedStep, InputMode};
use wiener_core::estimator::{Estimator, EstimatorConfig};
use wiener_core::harness::oracle::{cost_gradient_fd, mean_estimating_vector, offline_cost};
use wiener_core::model::reference::make_example2_model;
use wiener_core::model::{
    AffineMap, BlockDims, ConstraintSet, DisturbanceSde, Identity, Plant, StateSpacePlant, WienerModel,
};
use wiener_core::predictor::{estimating_vector, PredictorConfig, PredictorState, StepInput};
use wiener_core::rng::{derive_seed, CounterStreams};
use wiener_core::truth::{gen_example2, DataRecord, Dataset, DisturbanceCase, Example2Truth};

fn prbs_like(k: usize) -> f64 {
    if (k * 7 + 3) % 5 < 2 { 5.0 } else { -5.0 }
}

/// Sample variance of `y_bar` at each step, summed over the steps.
fn pooled_variance(paths: usize, replications: u64, steps: usize) -> f64 {
    let model = make_example2_model();
    let theta = [1.2, 0.27, 1.0, 0.4, 1.7];
    let step = DiscretizedStep::build(&model, &theta, 0.5, &InputMode::Hold).unwrap();
    let cfg = PredictorConfig { paths, stationary_init: false };
    let runs: Vec<Vec<f64>> = (0..replications)
        .into_par_iter()
        .map(|r| {
            let noise = CounterStreams::new(derive_seed(&[77, r]));
            let mut st = PredictorState::new(&model, &cfg, InputMode::Hold, &theta, &noise).unwrap();
            (0..steps)
                .map(|k| {
                    let input = StepInput { t_start: k as f64 * 0.5, delta: 0.5, held: prbs_like(k) };
                    st.step(&model, &theta, &step, &input, 0.0, &noise).unwrap().y_bar
                })
                .collect()
        })
        .collect();
    (0..steps)
        .map(|k| {
            let n = runs.len() as f64;
            let mean = runs.iter().map(|r| r[k]).sum::<f64>() / n;
            runs.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / (n - 1.0)
        })
        .sum()
}

#[test]
fn prediction_spread_shrinks_like_inverse_root_of_paths() {
    let single = pooled_variance(1, 2000, 8);
    let many = pooled_variance(10_000, 300, 8);
    let ratio = (single / many).sqrt();
    assert!((ratio / 100.0 - 1.0).abs() < 0.1, "std ratio {ratio}, expected 100");
}

fn gain_only_model() -> WienerModel {
    let one = DMatrix::from_element(1, 1, 1.0);
    WienerModel {
        name: "gain".into(),
        param_names: vec!["b".into()],
        blocks: BlockDims::new(1, 0, 0),
        plant: Plant::StateSpace(StateSpacePlant {
            drift: Arc::new(AffineMap::constant(-one.clone())),
            input: Arc::new(AffineMap::scalar_param(0)),
            output: Arc::new(AffineMap::constant(one.clone())),
        }),
        disturbance: DisturbanceSde::new(AffineMap::constant(-one.clone()), AffineMap::zeros(1, 1), AffineMap::constant(one)),
        nonlinearity: Arc::new(Identity),
        constraints: ConstraintSet::unconstrained(),
    }
}

#[test]
fn overestimated_gain_is_pulled_down() {
    let model = gain_only_model();
    let noise = CounterStreams::new(1);
    let cfg = PredictorConfig { paths: 3, stationary_init: false };
    let truth_gain = 1.0;
    let estimate = 2.0;
    let mut truth = PredictorState::new(&model, &cfg, InputMode::Hold, &[truth_gain], &noise).unwrap();
    let mut pred = PredictorState::new(&model, &cfg, InputMode::Hold, &[estimate], &noise).unwrap();
    let step_true = DiscretizedStep::build(&model, &[truth_gain], 0.5, &InputMode::Hold).unwrap();
    let step_est = DiscretizedStep::build(&model, &[estimate], 0.5, &InputMode::Hold).unwrap();
    let mut est = Estimator::new(EstimatorConfig::new(0.9, 1.0), ConstraintSet::unconstrained(), vec![estimate]).unwrap();
    for k in 0..20 {
        let input = StepInput { t_start: k as f64 * 0.5, delta: 0.5, held: 1.0 };
        let y = truth.step(&model, &[truth_gain], &step_true, &input, 0.0, &noise).unwrap().y_bar;
        let out = pred.step(&model, &[estimate], &step_est, &input, y, &noise).unwrap();
        assert!(out.eps < 0.0 && out.psi_bar[0] > 0.0, "step {k}: {out:?}");
        assert!(estimating_vector(&out)[0] < 0.0);
        let before = est.theta()[0];
        est.update(&out.psi_bar, out.eps).unwrap();
        assert!(est.theta()[0] < before);
    }
}

#[test]
fn online_estimating_vector_follows_the_cost_gradient() {
    let data = gen_example2(&Example2Truth::default(), 2000, 31).unwrap();
    let model = make_example2_model();
    let theta = [1.44, 0.3, 1.15, 0.05, 1.5];
    // The finite-path cost carries a variance term of order 1/M whose slope in the
    // dispersion is not small; extrapolating from M and 2M paths removes it.
    let fd_m = cost_gradient_fd(&model, &theta, &data, 500, 5, 1e-4).unwrap();
    let fd_2m = cost_gradient_fd(&model, &theta, &data, 1000, 5, 1e-4).unwrap();
    let fd: Vec<f64> = fd_m.iter().zip(&fd_2m).map(|(a, b)| 2.0 * b - a).collect();
    let online: Vec<f64> = mean_estimating_vector(&model, &theta, &data, 500, 6).unwrap().iter().map(|v| -v).collect();
    for j in 0..theta.len() {
        assert_eq!(fd[j].signum(), online[j].signum(), "component {j}: fd {fd:?} vs online {online:?}");
        let rel = (fd[j] - online[j]).abs() / fd[j].abs();
        assert!(rel < 0.2, "component {j}: fd {} vs online {} ({rel})", fd[j], online[j]);
    }
}

#[test]
fn truth_is_the_best_point_along_the_pole_coefficient() {
    let truth = Example2Truth::with_case(DisturbanceCase::case1());
    let data = gen_example2(&truth, 2000, 12).unwrap();
    let model = make_example2_model();
    let cost_at = |a: f64| offline_cost(&model, &[a, 0.27, 1.0, 0.05, 1.7], &data, 200, 3).unwrap();
    let at_truth = cost_at(1.2);
    for a in [0.96, 1.08, 1.32, 1.44] {
        let v = cost_at(a);
        assert!(at_truth < v, "V(1.2) = {at_truth} not below V({a}) = {v}");
    }
}

#[test]
fn noise_free_identity_model_reproduces_recorded_outputs() {
    let model = gain_only_model();
    let noise = CounterStreams::new(2);
    let cfg = PredictorConfig { paths: 1, stationary_init: false };
    let mut st = PredictorState::new(&model, &cfg, InputMode::Hold, &[1.5], &noise).unwrap();
    let step = DiscretizedStep::build(&model, &[1.5], 0.5, &InputMode::Hold).unwrap();
    let records: Vec<DataRecord> = (0..50)
        .map(|k| {
            let input = StepInput { t_start: k as f64 * 0.5, delta: 0.5, held: prbs_like(k) };
            let y = st.step(&model, &[1.5], &step, &input, 0.0, &noise).unwrap().y_bar;
            DataRecord { k: k as u64 + 1, t_k: (k + 1) as f64 * 0.5, u_k: prbs_like(k), y_k: y }
        })
        .collect();
    let data = Dataset::new(InputMode::Hold, records).unwrap();
    assert!(offline_cost(&model, &[1.5], &data, 4, 9).unwrap() < 1e-20);
}
