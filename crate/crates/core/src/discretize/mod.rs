//! Exact discretization: matrix exponentials, van Loan covariances, ZOH sampling of
//! transfer operators and their gradient filters, and exosystem-augmented steps.
//!
//! Every routine is a pure function of its inputs. [`DiscretizedStep`] bundles
//! everything the predictor needs for one sampling interval at one parameter value.

mod exo;
mod expm;
mod sde;
mod zoh;

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;

pub use exo::{exo_discretize, input_response, AffineGaussianStep, InputMode, InputResponse};
pub use expm::{expm, mat_exp};
pub use sde::{
    cov_sqrt, gradient_sde_discretize, gradient_sde_matrices, sde_discretize, van_loan_cov,
    DiscreteSdeStep, GradientSdeStep,
};
pub use zoh::{
    characteristic_polynomial, controllable_realization, gradient_operator, gradient_tf_discretize,
    state_space_to_arx, zoh_discretize, zoh_matrices, DiscreteArx,
};

use crate::model::{Plant, StateSpacePlant, WienerModel};
use crate::{Error, Result};

/// Plant gradient step for the state-space path: the augmented system
/// `[s; ∂s/∂θ_j]` with drift `[[A_p, 0], [∂A_p, A_p]]` and input gain
/// `[B_p; ∂B_p]`, plus `∂C_p`.
#[derive(Clone, Debug)]
pub struct PlantGradientStep {
    pub response: InputResponse,
    pub output_jacobian: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub enum PlantStep {
    Arx {
        arx: DiscreteArx,
        /// Indexed by parameter; `None` for parameters outside the operator.
        gradients: Vec<Option<DiscreteArx>>,
    },
    StateSpace {
        response: InputResponse,
        output: DMatrix<f64>,
        /// Indexed by parameter; `None` where the plant does not depend on it.
        gradients: Vec<Option<PlantGradientStep>>,
    },
}

/// All discrete matrices for one interval of length `delta` at one `θ`.
#[derive(Clone, Debug)]
pub struct DiscretizedStep {
    pub delta: f64,
    pub plant: PlantStep,
    pub sde: DiscreteSdeStep,
    /// One per parameter.
    pub grad_sde: Vec<GradientSdeStep>,
    pub c: DMatrix<f64>,
    pub c_jacobians: Vec<DMatrix<f64>>,
}

impl DiscretizedStep {
    pub fn build(
        model: &WienerModel,
        theta: &[f64],
        delta: f64,
        mode: &InputMode,
    ) -> Result<Self> {
        model.check_theta(theta)?;
        let d = model.dim();
        let plant = match &model.plant {
            Plant::Transfer(param) => {
                if *mode != InputMode::Hold {
                    return Err(Error::input(
                        "transfer-operator plants need a piecewise-constant input; \
                         use a state-space plant for exosystem inputs",
                    ));
                }
                let arx = zoh_discretize(&param.operator(theta)?, delta)?;
                let gradients = (0..d)
                    .map(|j| match param.role(j) {
                        Some(_) => gradient_tf_discretize(param, theta, j, delta).map(Some),
                        None => Ok(None),
                    })
                    .collect::<Result<Vec<_>>>()?;
                PlantStep::Arx { arx, gradients }
            }
            Plant::StateSpace(ss) => build_state_space(ss, theta, delta, mode)?,
        };
        let sde = sde_discretize(&model.disturbance, theta, delta)?;
        let grad_sde = (0..d)
            .map(|j| gradient_sde_discretize(&model.disturbance, theta, j, delta))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            delta,
            plant,
            sde,
            grad_sde,
            c: model.disturbance.c(theta),
            c_jacobians: (0..d).map(|j| model.disturbance.c_jacobian(theta, j)).collect(),
        })
    }
}

fn build_state_space(
    ss: &StateSpacePlant,
    theta: &[f64],
    delta: f64,
    mode: &InputMode,
) -> Result<PlantStep> {
    let a = ss.drift.eval(theta);
    let b = ss.input.eval(theta);
    let n = a.nrows();
    let response = input_response(&a, &b, mode, delta)?;
    let gradients = (0..theta.len())
        .map(|j| {
            let aj = ss.drift.jacobian(theta, j);
            let bj = ss.input.jacobian(theta, j);
            let cj = ss.output.jacobian(theta, j);
            if aj.iter().chain(bj.iter()).chain(cj.iter()).all(|v| *v == 0.0) {
                return Ok(None);
            }
            let mut f = DMatrix::zeros(2 * n, 2 * n);
            f.view_mut((0, 0), (n, n)).copy_from(&a);
            f.view_mut((n, 0), (n, n)).copy_from(&aj);
            f.view_mut((n, n), (n, n)).copy_from(&a);
            let mut g = DMatrix::zeros(2 * n, b.ncols());
            g.view_mut((0, 0), (n, b.ncols())).copy_from(&b);
            g.view_mut((n, 0), (n, b.ncols())).copy_from(&bj);
            Ok(Some(PlantGradientStep {
                response: input_response(&f, &g, mode, delta)?,
                output_jacobian: cj,
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PlantStep::StateSpace { response, output: ss.output.eval(theta), gradients })
}

/// Memo of [`DiscretizedStep`]s keyed by the exact bits of `θ` and `Δ` rounded to
/// 1e-9. Results never depend on whether an entry was hit.
#[derive(Debug, Default)]
pub struct StepCache {
    entries: HashMap<(Vec<u64>, i64), Arc<DiscretizedStep>>,
    capacity: usize,
}

impl StepCache {
    pub fn new(capacity: usize) -> Self {
        Self { entries: HashMap::new(), capacity: capacity.max(1) }
    }

    pub fn get_or_build(
        &mut self,
        model: &WienerModel,
        theta: &[f64],
        delta: f64,
        mode: &InputMode,
    ) -> Result<Arc<DiscretizedStep>> {
        let key = (theta.iter().map(|v| v.to_bits()).collect(), (delta * 1e9).round() as i64);
        if let Some(hit) = self.entries.get(&key) {
            return Ok(hit.clone());
        }
        let step = Arc::new(DiscretizedStep::build(model, theta, delta, mode)?);
        if self.entries.len() >= self.capacity {
            self.entries.clear();
        }
        self.entries.insert(key, step.clone());
        Ok(step)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
