//! Exact stepping of linear systems whose input has a known inter-sample behaviour.

use nalgebra::{DMatrix, DVector};

use super::expm::expm;
use super::sde::{cov_sqrt, van_loan_cov};
use super::zoh::zoh_matrices;
use crate::model::{InputSignal, Multisine};
use crate::{Error, Result};

/// How the input behaves between samples.
#[derive(Clone, Debug, PartialEq)]
pub enum InputMode {
    /// Held constant over each interval.
    Hold,
    /// Generated by the oscillator bank of a multisine.
    Exosystem(Multisine),
}

impl InputMode {
    pub fn from_signal(signal: &InputSignal) -> Self {
        match signal {
            InputSignal::PiecewiseConstant { .. } => InputMode::Hold,
            InputSignal::Exosystem(ms) => InputMode::Exosystem(ms.clone()),
        }
    }

    /// The driving vector `v` at the start of an interval: `[u_k]` under hold,
    /// the oscillator state `e(t_k)` otherwise.
    pub fn driving_vector(&self, t_start: f64, held: f64) -> DVector<f64> {
        match self {
            InputMode::Hold => DVector::from_element(1, held),
            InputMode::Exosystem(ms) => ms.state(t_start),
        }
    }
}

/// `x(t+Δ) = Φ x(t) + Γ v(t)` for `dx = F x dt + G u dt`, where `v` is the
/// driving vector of the [`InputMode`].
#[derive(Clone, Debug, PartialEq)]
pub struct InputResponse {
    pub transition: DMatrix<f64>,
    pub input_map: DMatrix<f64>,
}

impl InputResponse {
    pub fn apply(&self, x: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        &self.transition * x + &self.input_map * v
    }
}

/// Exact input response over `Δ`. Under an exosystem the state is augmented with
/// the `2L` oscillator states and one block exponential of
/// `[[F, G H], [0, S]] Δ` gives `Φ` and `Γ`.
pub fn input_response(
    drift: &DMatrix<f64>,
    input_gain: &DMatrix<f64>,
    mode: &InputMode,
    delta: f64,
) -> Result<InputResponse> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::input(format!("step length must be positive, got {delta}")));
    }
    if drift.iter().chain(input_gain.iter()).any(|v| !v.is_finite()) {
        return Err(Error::input("system matrices must be finite"));
    }
    match mode {
        InputMode::Hold => {
            let (transition, input_map) = zoh_matrices(drift, input_gain, delta);
            Ok(InputResponse { transition, input_map })
        }
        InputMode::Exosystem(ms) => {
            let n = drift.nrows();
            let q = 2 * ms.len();
            let mut block = DMatrix::zeros(n + q, n + q);
            block.view_mut((0, 0), (n, n)).copy_from(&(drift * delta));
            block.view_mut((0, n), (n, q)).copy_from(&(input_gain * ms.output_row() * delta));
            block.view_mut((n, n), (q, q)).copy_from(&(ms.generator() * delta));
            let e = expm(&block);
            Ok(InputResponse {
                transition: e.view((0, 0), (n, n)).into_owned(),
                input_map: e.view((0, n), (n, q)).into_owned(),
            })
        }
    }
}

/// `x(t_k + Δ) = A_Δ x(t_k) + g_k + B_Δ ξ`, `ξ ~ N(0, I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineGaussianStep {
    pub a_delta: DMatrix<f64>,
    pub forcing: DVector<f64>,
    pub b_delta: DMatrix<f64>,
}

impl AffineGaussianStep {
    pub fn mean(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a_delta * x + &self.forcing
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        &self.b_delta * self.b_delta.transpose()
    }
}

/// Exact step of `dx = F x dt + G u(t) dt + L dβ` over `[t_k, t_k + Δ]` with a
/// multisine input.
pub fn exo_discretize(
    drift: &DMatrix<f64>,
    input_gain: &DMatrix<f64>,
    dispersion: &DMatrix<f64>,
    input: &Multisine,
    t_start: f64,
    delta: f64,
) -> Result<AffineGaussianStep> {
    let mode = InputMode::Exosystem(input.clone());
    let resp = input_response(drift, input_gain, &mode, delta)?;
    let (_, q) = van_loan_cov(drift, dispersion, delta)?;
    Ok(AffineGaussianStep {
        forcing: &resp.input_map * input.state(t_start),
        a_delta: resp.transition,
        b_delta: cov_sqrt(&q)?,
    })
}
