//! Recursive Monte-Carlo output-error predictor and prediction-error gradient.
//!
//! The gradient vector is the output sensitivity `ψ = ∂ȳ/∂θ = −∂ε/∂θ`, so that
//! `θ + γ R⁻¹ ψ ε` is a descent step on the squared prediction error.
//!
//! Each step advances `M` disturbance paths driven by the `β^(y)` channel to form
//! `ȳ_k`, and `M` augmented gradient paths `ζ^(j)` driven by the independent
//! `β^(ψ)` channel to form `ψ̄_k`. The deterministic plant response and its
//! parameter gradients are propagated once per step through either ARX regressors
//! (transfer-operator plants) or exact state-space steps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::discretize::{DiscretizedStep, InputMode, PlantStep};
use crate::model::{Plant, WienerModel};
use crate::rng::{Channel, NoiseSource};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictorConfig {
    /// Number of Monte-Carlo paths `M`.
    pub paths: usize,
    /// Draw the initial disturbance states from the stationary law (only when the
    /// drift is Hurwitz at the initial parameter); otherwise they start at zero.
    #[serde(default)]
    pub stationary_init: bool,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self { paths: 100, stationary_init: false }
    }
}

/// Input over the interval `[t_{k-1}, t_k]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInput {
    pub t_start: f64,
    pub delta: f64,
    /// Held value on the interval; ignored under an exosystem input.
    pub held: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PredictionOutput {
    pub y_bar: f64,
    pub psi_bar: Vec<f64>,
    pub eps: f64,
    /// Deterministic plant response `z_k`.
    pub z: f64,
}

/// `ψ̄_k ε_k`, the Monte-Carlo estimate of the estimating function.
pub fn estimating_vector(out: &PredictionOutput) -> Vec<f64> {
    out.psi_bar.iter().map(|p| p * out.eps).collect()
}

/// Past outputs and inputs of one difference equation, most recent first.
#[derive(Clone, Debug, PartialEq)]
struct Regressor {
    outputs: Vec<f64>,
    inputs: Vec<f64>,
}

impl Regressor {
    fn zeros(order: usize) -> Self {
        Self { outputs: vec![0.0; order], inputs: vec![0.0; order] }
    }

    fn push_input(&mut self, u: f64) {
        if !self.inputs.is_empty() {
            self.inputs.rotate_right(1);
            self.inputs[0] = u;
        }
    }

    fn push_output(&mut self, z: f64) {
        if !self.outputs.is_empty() {
            self.outputs.rotate_right(1);
            self.outputs[0] = z;
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum PlantState {
    Arx { main: Regressor, gradients: Vec<Option<Regressor>> },
    StateSpace { state: DVector<f64>, gradients: Vec<DVector<f64>> },
}

/// Everything the predictor carries between steps. Its size is fixed at
/// construction: `O(M·d·n_w)` path states plus the plant regressors.
#[derive(Clone, Debug)]
pub struct PredictorState {
    k: u64,
    paths: usize,
    n_w: usize,
    d: usize,
    mode: InputMode,
    plant: PlantState,
    /// `M × n_w`, driven by `β^(y)`.
    w_paths: Vec<f64>,
    /// `M × d × 2n_w`, driven by `β^(ψ)`.
    zeta_paths: Vec<f64>,
    // scratch
    psi_scratch: Vec<f64>,
    f_scratch: Vec<f64>,
}

fn matvec(m: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..x.len()).map(|j| m[(i, j)] * x[j]).sum();
    }
}

fn matvec_add(m: &DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o += (0..x.len()).map(|j| m[(i, j)] * x[j]).sum::<f64>();
    }
}

fn row_dot(row: &DMatrix<f64>, x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(j, v)| row[(0, j)] * v).sum()
}

/// Stationary covariance of `dw = A w dt + B dβ` for Hurwitz `A`.
fn stationary_covariance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let ident = DMatrix::<f64>::identity(n, n);
    // (I ⊗ A + A ⊗ I) vec(P) = -vec(B Bᵀ)
    let kron = ident.kronecker(a) + a.kronecker(&ident);
    let rhs = -(b * b.transpose());
    let rhs = DVector::from_column_slice(rhs.as_slice());
    let sol = kron
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::input("stationary covariance: singular Lyapunov operator"))?;
    let p = DMatrix::from_column_slice(n, n, sol.as_slice());
    Ok((&p + p.transpose()) * 0.5)
}

impl PredictorState {
    /// Zero regressors and (by default) zero path states.
    pub fn new(
        model: &WienerModel,
        config: &PredictorConfig,
        mode: InputMode,
        theta0: &[f64],
        noise: &dyn NoiseSource,
    ) -> Result<Self> {
        model.check_theta(theta0)?;
        if config.paths == 0 {
            return Err(Error::input("the predictor needs at least one path"));
        }
        let d = model.dim();
        let n_w = model.disturbance.state_dim();
        let plant = match &model.plant {
            Plant::Transfer(param) => {
                if mode != InputMode::Hold {
                    return Err(Error::input(
                        "transfer-operator plants need a piecewise-constant input",
                    ));
                }
                let n = param.order();
                let gradients = (0..d)
                    .map(|j| {
                        param.role(j).map(|role| {
                            Regressor::zeros(match role {
                                crate::model::CoefficientRole::Numerator(_) => n,
                                crate::model::CoefficientRole::Denominator(_) => 2 * n,
                            })
                        })
                    })
                    .collect();
                PlantState::Arx { main: Regressor::zeros(n), gradients }
            }
            Plant::StateSpace(ss) => {
                let n = ss.state_dim();
                PlantState::StateSpace {
                    state: DVector::zeros(n),
                    gradients: vec![DVector::zeros(n); d],
                }
            }
        };
        let mut state = Self {
            k: 0,
            paths: config.paths,
            n_w,
            d,
            mode,
            plant,
            w_paths: vec![0.0; config.paths * n_w],
            zeta_paths: vec![0.0; config.paths * d * 2 * n_w],
            psi_scratch: vec![0.0; d],
            f_scratch: vec![0.0; model.blocks.nonlinearity],
        };
        if config.stationary_init {
            state.init_stationary(model, theta0, noise)?;
        }
        Ok(state)
    }

    fn init_stationary(
        &mut self,
        model: &WienerModel,
        theta: &[f64],
        noise: &dyn NoiseSource,
    ) -> Result<()> {
        let a = model.disturbance.a(theta);
        let eig = a.complex_eigenvalues();
        if eig.iter().any(|c| c.re >= -1e-12) {
            return Err(Error::input("stationary initialization needs a Hurwitz drift"));
        }
        let p = stationary_covariance(&a, &model.disturbance.b(theta))?;
        let root = crate::discretize::cov_sqrt(&p)?;
        let n_w = self.n_w;
        let mut xi = vec![0.0; n_w];
        for m in 0..self.paths {
            noise.fill_normals(Channel::PredictorY, 0, m as u64, &mut xi);
            matvec(&root, &xi, &mut self.w_paths[m * n_w..(m + 1) * n_w]);
            noise.fill_normals(Channel::PredictorPsi, 0, m as u64, &mut xi);
            let mut w = vec![0.0; n_w];
            matvec(&root, &xi, &mut w);
            for j in 0..self.d {
                let off = (m * self.d + j) * 2 * n_w;
                self.zeta_paths[off..off + n_w].copy_from_slice(&w);
            }
        }
        Ok(())
    }

    /// Number of completed steps.
    pub fn step_index(&self) -> u64 {
        self.k
    }

    pub fn paths(&self) -> usize {
        self.paths
    }

    /// `w_{m,k}` of the `β^(y)` channel.
    pub fn w_path(&self, m: usize) -> &[f64] {
        &self.w_paths[m * self.n_w..(m + 1) * self.n_w]
    }

    /// `ζ^(j)_{m,k}` of the `β^(ψ)` channel.
    pub fn zeta_path(&self, m: usize, j: usize) -> &[f64] {
        let off = (m * self.d + j) * 2 * self.n_w;
        &self.zeta_paths[off..off + 2 * self.n_w]
    }

    /// Total number of stored floating-point values.
    pub fn storage_len(&self) -> usize {
        let plant = match &self.plant {
            PlantState::Arx { main, gradients } => {
                main.outputs.len()
                    + main.inputs.len()
                    + gradients
                        .iter()
                        .flatten()
                        .map(|r| r.outputs.len() + r.inputs.len())
                        .sum::<usize>()
            }
            PlantState::StateSpace { state, gradients } => {
                state.len() + gradients.iter().map(|g| g.len()).sum::<usize>()
            }
        };
        plant + self.w_paths.len() + self.zeta_paths.len()
    }

    /// Advances the plant response by one interval; returns `z_k` and writes `z^(j)_k`.
    fn advance_plant(
        &mut self,
        step: &DiscretizedStep,
        input: &StepInput,
        z_grad: &mut [f64],
    ) -> Result<f64> {
        match (&mut self.plant, &step.plant) {
            (PlantState::Arx { main, gradients }, PlantStep::Arx { arx, gradients: g_arx }) => {
                main.push_input(input.held);
                let z = arx.step(&main.outputs, &main.inputs);
                main.push_output(z);
                for (j, (reg, filt)) in gradients.iter_mut().zip(g_arx).enumerate() {
                    z_grad[j] = match (reg, filt) {
                        (Some(reg), Some(filt)) => {
                            reg.push_input(input.held);
                            let zj = filt.step(&reg.outputs, &reg.inputs);
                            reg.push_output(zj);
                            zj
                        }
                        _ => 0.0,
                    };
                }
                Ok(z)
            }
            (
                PlantState::StateSpace { state, gradients },
                PlantStep::StateSpace { response, output, gradients: g_steps },
            ) => {
                let v = self.mode.driving_vector(input.t_start, input.held);
                let n = state.len();
                let next = response.apply(state, &v);
                for (j, (grad, g_step)) in gradients.iter_mut().zip(g_steps).enumerate() {
                    match g_step {
                        Some(g) => {
                            let mut aug = DVector::zeros(2 * n);
                            aug.rows_mut(0, n).copy_from(state);
                            aug.rows_mut(n, n).copy_from(grad);
                            let out = g.response.apply(&aug, &v);
                            grad.copy_from(&out.rows(n, n));
                            z_grad[j] = row_dot(output, grad.as_slice())
                                + row_dot(&g.output_jacobian, next.as_slice());
                        }
                        None => {
                            grad.fill(0.0);
                            z_grad[j] = 0.0;
                        }
                    }
                }
                *state = next;
                Ok(row_dot(output, state.as_slice()))
            }
            _ => Err(Error::input("discretized step does not match the plant type")),
        }
    }

    /// One predictor step at `θ̂_{k-1}` with `step` built for the current interval.
    pub fn step(
        &mut self,
        model: &WienerModel,
        theta: &[f64],
        step: &DiscretizedStep,
        input: &StepInput,
        y: f64,
        noise: &dyn NoiseSource,
    ) -> Result<PredictionOutput> {
        let k = self.k + 1;
        let (m_paths, n_w, d) = (self.paths, self.n_w, self.d);
        let f = &model.nonlinearity;
        let f_params = model.nonlinearity_params(theta);
        let f_range = model.blocks.nonlinearity_range();

        // disturbance paths on the β^(y) channel
        let mut beta = vec![0.0; n_w];
        let mut tmp = vec![0.0; n_w];
        for m in 0..m_paths {
            noise.fill_normals(Channel::PredictorY, k, m as u64, &mut beta);
            let w = &mut self.w_paths[m * n_w..(m + 1) * n_w];
            matvec(&step.sde.a_delta, w, &mut tmp);
            matvec_add(&step.sde.b_delta, &beta, &mut tmp);
            w.copy_from_slice(&tmp);
        }

        let mut z_grad = vec![0.0; d];
        let z = self.advance_plant(step, input, &mut z_grad)?;

        let mut y_sum = 0.0;
        for m in 0..m_paths {
            let x = z + row_dot(&step.c, &self.w_paths[m * n_w..(m + 1) * n_w]);
            y_sum += f.value(x, f_params);
        }
        let y_bar = y_sum / m_paths as f64;

        // gradient paths on the β^(ψ) channel
        let mut beta_psi = vec![0.0; 2 * n_w];
        let mut zeta_tmp = vec![0.0; 2 * n_w];
        let mut psi_sum = vec![0.0; d];
        for m in 0..m_paths {
            noise.fill_normals(Channel::PredictorPsi, k, m as u64, &mut beta_psi);
            for j in 0..d {
                let off = (m * d + j) * 2 * n_w;
                let zeta = &mut self.zeta_paths[off..off + 2 * n_w];
                let g = &step.grad_sde[j];
                matvec(&g.f_delta, zeta, &mut zeta_tmp);
                matvec_add(&g.l_delta, &beta_psi, &mut zeta_tmp);
                zeta.copy_from_slice(&zeta_tmp);
            }
            if d == 0 {
                continue;
            }
            let base = m * d * 2 * n_w;
            let w_psi = &self.zeta_paths[base..base + n_w];
            let x = z + row_dot(&step.c, w_psi);
            let fx = f.dx(x, f_params);
            f.dparams(x, f_params, &mut self.f_scratch);
            for j in 0..d {
                let off = (m * d + j) * 2 * n_w;
                let w_j = &self.zeta_paths[off + n_w..off + 2 * n_w];
                let x_j = z_grad[j] + row_dot(&step.c_jacobians[j], w_psi) + row_dot(&step.c, w_j);
                let mut y_j = fx * x_j;
                if f_range.contains(&j) {
                    y_j += self.f_scratch[j - f_range.start];
                }
                self.psi_scratch[j] = y_j;
            }
            for (s, p) in psi_sum.iter_mut().zip(&self.psi_scratch) {
                *s += p;
            }
        }
        let psi_bar: Vec<f64> = psi_sum.iter().map(|s| s / m_paths as f64).collect();
        let eps = y - y_bar;
        self.k = k;
        if !(y_bar.is_finite() && eps.is_finite() && psi_bar.iter().all(|p| p.is_finite())) {
            return Err(Error::Divergence {
                step: k as usize,
                reason: "non-finite predictor output".to_string(),
            });
        }
        Ok(PredictionOutput { y_bar, psi_bar, eps, z })
    }
}

/// Stationary covariance `P` solving `A P + P Aᵀ + B Bᵀ = 0` for Hurwitz `A`.
pub fn ou_stationary_covariance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    stationary_covariance(a, b)
}
