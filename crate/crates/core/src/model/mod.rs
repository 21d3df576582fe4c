//! Parametric continuous-time Wiener models.
//!
//! A model is a linear plant driven by a known input, an additive linear disturbance
//! SDE and a static output nonlinearity:
//!
//! ```text
//! dw = A(θ) w dt + B(θ) dβ
//! x  = G(p; θ) u + C(θ) w
//! y  = f(x; θ)
//! ```
//!
//! The parameter vector is ordered `θ = [θ_G; θ_w; θ_f]`. Blocks may share entries
//! through the index maps of the plant and disturbance parameterizations (the
//! first reference model uses the same pole in both).

mod input;
mod nonlinearity;
pub mod reference;
mod sde;
mod transfer;

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use input::{InputSignal, Multisine};
pub use nonlinearity::{Hill, Identity, Nonlinearity, Square};
pub use reference::{
    example1_baseline_model, example2_baseline_model, make_example1_model, make_example2_model,
    EXAMPLE1_TRUE_THETA, EXAMPLE2_TRUE_THETA,
};
pub use sde::{AffineMap, DisturbanceSde, MatrixMap};
pub use transfer::{
    poly_mul, stability_check, CoefficientRole, TfParameterization, TransferOperator,
};

/// Sizes of the plant, disturbance and nonlinearity blocks of `θ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockDims {
    pub plant: usize,
    pub disturbance: usize,
    pub nonlinearity: usize,
}

impl BlockDims {
    pub fn new(plant: usize, disturbance: usize, nonlinearity: usize) -> Self {
        Self { plant, disturbance, nonlinearity }
    }

    pub fn total(&self) -> usize {
        self.plant + self.disturbance + self.nonlinearity
    }

    pub fn plant_range(&self) -> Range<usize> {
        0..self.plant
    }

    pub fn disturbance_range(&self) -> Range<usize> {
        self.plant..self.plant + self.disturbance
    }

    pub fn nonlinearity_range(&self) -> Range<usize> {
        self.plant + self.disturbance..self.total()
    }
}

/// The full parameter vector together with its block layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    values: Vec<f64>,
    blocks: BlockDims,
}

impl ParameterVector {
    pub fn new(values: Vec<f64>, blocks: BlockDims) -> Result<Self> {
        if blocks.total() != values.len() {
            return Err(Error::input(format!(
                "block dimensions sum to {} but the vector has {} entries",
                blocks.total(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!("parameter {i} is not finite")));
        }
        Ok(Self { values, blocks })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn blocks(&self) -> BlockDims {
        self.blocks
    }

    pub fn plant(&self) -> &[f64] {
        &self.values[self.blocks.plant_range()]
    }

    pub fn disturbance(&self) -> &[f64] {
        &self.values[self.blocks.disturbance_range()]
    }

    pub fn nonlinearity(&self) -> &[f64] {
        &self.values[self.blocks.nonlinearity_range()]
    }
}

/// One membership rule of a constraint set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Constraint {
    /// `θ[index] < bound`
    Below { index: usize, bound: f64 },
    /// `θ[index] > bound`
    Above { index: usize, bound: f64 },
    /// `p^n + Σ θ[denominator[j]] p^j` has all roots strictly in the left half plane.
    Hurwitz { denominator: Vec<usize> },
}

impl Constraint {
    fn holds(&self, theta: &[f64]) -> bool {
        match self {
            Constraint::Below { index, bound } => theta.get(*index).is_some_and(|v| v < bound),
            Constraint::Above { index, bound } => theta.get(*index).is_some_and(|v| v > bound),
            Constraint::Hurwitz { denominator } => {
                let Some(coeffs) = denominator
                    .iter()
                    .map(|&i| theta.get(i).copied())
                    .collect::<Option<Vec<_>>>()
                else {
                    return false;
                };
                TransferOperator::new(vec![1.0], coeffs)
                    .map(|op| stability_check(&op))
                    .unwrap_or(false)
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            Constraint::Below { index, bound } => format!("theta[{index}] < {bound}"),
            Constraint::Above { index, bound } => format!("theta[{index}] > {bound}"),
            Constraint::Hurwitz { denominator } => {
                format!("denominator with coefficients theta{denominator:?} is Hurwitz")
            }
        }
    }
}

/// The compact parameter set `Θ`, as a conjunction of simple rules.
///
/// Non-finite vectors are never members.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintSet {
    rules: Vec<Constraint>,
}

impl ConstraintSet {
    pub fn new(rules: Vec<Constraint>) -> Self {
        Self { rules }
    }

    pub fn unconstrained() -> Self {
        Self::default()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.iter().all(|v| v.is_finite()) && self.rules.iter().all(|r| r.holds(theta))
    }

    pub fn description(&self) -> String {
        if self.rules.is_empty() {
            return "all finite vectors".to_string();
        }
        self.rules.iter().map(Constraint::describe).collect::<Vec<_>>().join(" and ")
    }

    pub fn rules(&self) -> &[Constraint] {
        &self.rules
    }
}

/// Linear state-space plant `ds = A_p(θ) s dt + B_p(θ) u dt`, `z = C_p(θ) s`.
///
/// Used when plant and disturbance share parameters, or when the input is not
/// piecewise constant.
#[derive(Clone, Debug)]
pub struct StateSpacePlant {
    pub drift: Arc<dyn MatrixMap>,
    pub input: Arc<dyn MatrixMap>,
    pub output: Arc<dyn MatrixMap>,
}

impl StateSpacePlant {
    pub fn state_dim(&self) -> usize {
        self.drift.shape().0
    }
}

#[derive(Clone, Debug)]
pub enum Plant {
    /// Rational transfer operator, sampled under zero-order hold into an ARX recursion.
    Transfer(TfParameterization),
    /// Linear state-space realization, stepped exactly with the input's known
    /// inter-sample behaviour.
    StateSpace(StateSpacePlant),
}

/// Parametric description of a stochastic Wiener model.
#[derive(Clone)]
pub struct WienerModel {
    pub name: String,
    pub param_names: Vec<String>,
    pub blocks: BlockDims,
    pub plant: Plant,
    pub disturbance: DisturbanceSde,
    pub nonlinearity: Arc<dyn Nonlinearity>,
    pub constraints: ConstraintSet,
}

impl fmt::Debug for WienerModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("WienerModel")
            .field("name", &self.name)
            .field("param_names", &self.param_names)
            .field("blocks", &self.blocks)
            .field("plant", &self.plant)
            .field("nonlinearity", &self.nonlinearity)
            .field("constraints", &self.constraints.description())
            .finish_non_exhaustive()
    }
}

impl WienerModel {
    pub fn dim(&self) -> usize {
        self.blocks.total()
    }

    pub fn nonlinearity_params<'a>(&self, theta: &'a [f64]) -> &'a [f64] {
        &theta[self.blocks.nonlinearity_range()]
    }

    /// Checks dimensions and that `theta` has the model's length.
    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::input(format!(
                "model {} expects {} parameters, got {}",
                self.name,
                self.dim(),
                theta.len()
            )));
        }
        Ok(())
    }

    pub fn parameter_vector(&self, values: Vec<f64>) -> Result<ParameterVector> {
        ParameterVector::new(values, self.blocks)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameter_vector_checks_blocks_and_finiteness() {
        let blocks = BlockDims::new(3, 1, 1);
        let p = ParameterVector::new(vec![1.2, 0.27, 1.0, 0.5, 1.7], blocks).unwrap();
        assert_eq!(p.plant(), &[1.2, 0.27, 1.0]);
        assert_eq!(p.disturbance(), &[0.5]);
        assert_eq!(p.nonlinearity(), &[1.7]);
        assert!(ParameterVector::new(vec![1.0; 4], blocks).is_err());
        assert!(ParameterVector::new(vec![1.0, 1.0, f64::NAN, 1.0, 1.0], blocks).is_err());
    }

    #[test]
    fn constraint_rules() {
        let set = ConstraintSet::new(vec![
            Constraint::Hurwitz { denominator: vec![1, 0] },
            Constraint::Above { index: 2, bound: 1.0 },
        ]);
        assert!(set.contains(&[1.2, 0.27, 1.7]));
        assert!(!set.contains(&[-1.2, 0.27, 1.7]));
        assert!(!set.contains(&[1.2, 0.27, 0.9]));
        assert!(!set.contains(&[1.2, f64::INFINITY, 1.7]));
        assert!(!set.contains(&[1.2]));
        assert!(ConstraintSet::unconstrained().contains(&[3.0]));
        assert!(set.description().contains("Hurwitz"));
    }

    #[test]
    fn constraint_set_serde_roundtrip() {
        let set = ConstraintSet::new(vec![Constraint::Below { index: 0, bound: 0.0 }]);
        let json = serde_json::to_string(&set).unwrap();
        let back: ConstraintSet = serde_json::from_str(&json).unwrap();
        assert_eq!(set, back);
    }
}
