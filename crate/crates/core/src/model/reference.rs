//! The two reference models.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{
    AffineMap, BlockDims, Constraint, ConstraintSet, DisturbanceSde, Hill, Plant, Square,
    StateSpacePlant, TfParameterization, WienerModel,
};

/// `[a, b, σ]` of the first reference system.
pub const EXAMPLE1_TRUE_THETA: [f64; 3] = [-1.0, 1.0, 1.0];

/// `[a, b, c, σ, α]` of the second reference system. `σ` has no true value when
/// the data come from one of the OU-based disturbance cases; 1.0 is a placeholder.
pub const EXAMPLE2_TRUE_THETA: [f64; 5] = [1.2, 0.27, 1.0, 1.0, 1.7];

fn one() -> DMatrix<f64> {
    DMatrix::from_element(1, 1, 1.0)
}

fn example1(with_disturbance: bool) -> WienerModel {
    let plant = StateSpacePlant {
        drift: Arc::new(AffineMap::scalar_param(0)),
        input: Arc::new(AffineMap::scalar_param(1)),
        output: Arc::new(AffineMap::constant(one())),
    };
    let dispersion =
        if with_disturbance { AffineMap::scalar_param(2) } else { AffineMap::zeros(1, 1) };
    let disturbance =
        DisturbanceSde::new(AffineMap::scalar_param(0), dispersion, AffineMap::constant(one()));
    let (names, blocks) = if with_disturbance {
        (vec!["a", "b", "sigma"], BlockDims::new(2, 1, 0))
    } else {
        (vec!["a", "b"], BlockDims::new(2, 0, 0))
    };
    WienerModel {
        name: if with_disturbance { "example1" } else { "example1-baseline" }.to_string(),
        param_names: names.into_iter().map(String::from).collect(),
        blocks,
        plant: Plant::StateSpace(plant),
        disturbance,
        nonlinearity: Arc::new(Square),
        constraints: ConstraintSet::new(vec![Constraint::Below { index: 0, bound: 0.0 }]),
    }
}

/// `dx = a x dt + b u dt + σ dβ`, `y = x²`, with `θ = [a, b, σ]` and `Θ = {a < 0}`.
///
/// Plant and disturbance share the pole `a`, so the plant is a state-space
/// realization (`z`-state with drift `a`, input gain `b`) and the disturbance a
/// scalar OU process with the same drift.
pub fn make_example1_model() -> WienerModel {
    example1(true)
}

/// Example 1 without the disturbance (`w ≡ 0`), `θ = [a, b]`.
pub fn example1_baseline_model() -> WienerModel {
    example1(false)
}

fn example2(with_disturbance: bool) -> WienerModel {
    let alpha = if with_disturbance { 4 } else { 3 };
    let dispersion =
        if with_disturbance { AffineMap::scalar_param(3) } else { AffineMap::zeros(1, 1) };
    let disturbance =
        DisturbanceSde::new(AffineMap::zeros(1, 1), dispersion, AffineMap::constant(one()));
    let (names, blocks) = if with_disturbance {
        (vec!["a", "b", "c", "sigma", "alpha"], BlockDims::new(3, 1, 1))
    } else {
        (vec!["a", "b", "c", "alpha"], BlockDims::new(3, 0, 1))
    };
    WienerModel {
        name: if with_disturbance { "example2" } else { "example2-baseline" }.to_string(),
        param_names: names.into_iter().map(String::from).collect(),
        blocks,
        // c / (p² + a p + b): c_0 = θ[2], d_0 = θ[1], d_1 = θ[0]
        plant: Plant::Transfer(TfParameterization { numerator: vec![2], denominator: vec![1, 0] }),
        disturbance,
        nonlinearity: Arc::new(Hill),
        constraints: ConstraintSet::new(vec![
            Constraint::Hurwitz { denominator: vec![1, 0] },
            Constraint::Above { index: alpha, bound: 1.0 },
        ]),
    }
}

/// `dw = σ dβ`, `x = c/(p² + a p + b) u + w`, `y = 1/(1 + |x|^α)` with
/// `θ = [a, b, c, σ, α]`; `Θ` requires a Hurwitz denominator and `α > 1`.
pub fn make_example2_model() -> WienerModel {
    example2(true)
}

/// Example 2 without the disturbance (`w ≡ 0`), `θ = [a, b, c, α]`.
pub fn example2_baseline_model() -> WienerModel {
    example2(false)
}
