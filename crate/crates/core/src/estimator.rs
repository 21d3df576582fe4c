//! Projected stochastic-Newton parameter recursion.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::model::ConstraintSet;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DivergencePolicy {
    /// Stop the run and report the failing step.
    #[default]
    Abort,
    /// Restart from the initial parameter and Hessian estimate.
    Reset,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    #[serde(default = "default_gain_scale")]
    pub gain_scale: f64,
    pub gain_exponent: f64,
    /// `R_0 = c I`.
    pub hessian_scale: f64,
    /// Runs whose estimate leaves this norm ball are declared divergent.
    #[serde(default = "default_max_norm")]
    pub max_norm: f64,
    #[serde(default)]
    pub divergence: DivergencePolicy,
}

fn default_gain_scale() -> f64 {
    1.0
}

fn default_max_norm() -> f64 {
    1e6
}

impl EstimatorConfig {
    pub fn new(gain_exponent: f64, hessian_scale: f64) -> Self {
        Self {
            gain_scale: 1.0,
            gain_exponent,
            hessian_scale,
            max_norm: default_max_norm(),
            divergence: DivergencePolicy::Abort,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gain_exponent > 0.5 && self.gain_exponent <= 1.0) {
            return Err(Error::Config(format!(
                "gain exponent must lie in (0.5, 1], got {}",
                self.gain_exponent
            )));
        }
        if !(self.gain_scale > 0.0 && self.gain_scale.is_finite()) {
            return Err(Error::Config(format!("gain scale must be positive, got {}", self.gain_scale)));
        }
        if !(self.hessian_scale > 0.0 && self.hessian_scale.is_finite()) {
            return Err(Error::Config(format!(
                "initial Hessian scale must be positive, got {}",
                self.hessian_scale
            )));
        }
        if !(self.max_norm > 0.0) {
            return Err(Error::Config("divergence bound must be positive".into()));
        }
        Ok(())
    }
}

/// `γ_k = γ_0 / k^exp`.
pub fn gain(k: u64, config: &EstimatorConfig) -> f64 {
    assert!(k >= 1, "gain is defined for k >= 1");
    config.gain_scale / (k as f64).powf(config.gain_exponent)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSnapshot {
    pub k: u64,
    pub theta: Vec<f64>,
    /// Row-major `d × d` Hessian estimate.
    pub hessian: Vec<f64>,
    pub eps: f64,
    pub psi_norm: f64,
    pub projection_hit: bool,
}

impl EstimatorSnapshot {
    pub fn hessian_matrix(&self) -> DMatrix<f64> {
        let d = self.theta.len();
        DMatrix::from_row_slice(d, d, &self.hessian)
    }
}

/// `candidate` if it lies in `Θ`, else the previous estimate. The flag reports
/// whether the candidate was rejected.
pub fn project(candidate: &[f64], previous: &[f64], set: &ConstraintSet) -> Result<(Vec<f64>, bool)> {
    if !set.contains(previous) {
        return Err(Error::Constraint(format!(
            "previous estimate {previous:?} is outside {}",
            set.description()
        )));
    }
    if set.contains(candidate) {
        Ok((candidate.to_vec(), false))
    } else {
        Ok((previous.to_vec(), true))
    }
}

/// Solves `R x = v` for symmetric PSD `R`, regularizing the diagonal by
/// `1e-8·trace(R)/d` when the condition number exceeds `1e12`.
pub fn solve_hessian(r: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let d = r.nrows();
    let eig = r.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let min = eig.iter().fold(f64::INFINITY, |m, e| m.min(e.abs()));
    let mut mat = r.clone();
    if !(max > 0.0) || max / min > 1e12 || eig.iter().any(|&e| e <= 0.0) {
        let reg = 1e-8 * r.trace() / d as f64;
        let reg = if reg > 0.0 { reg } else { 1e-12 };
        for i in 0..d {
            mat[(i, i)] += reg;
        }
    }
    if let Some(ch) = mat.clone().cholesky() {
        return Ok(ch.solve(v));
    }
    mat.lu().solve(v).ok_or_else(|| Error::Divergence {
        step: 0,
        reason: "singular Hessian estimate".into(),
    })
}

/// Running state of the recursion for one replication.
#[derive(Clone, Debug)]
pub struct Estimator {
    config: EstimatorConfig,
    constraints: ConstraintSet,
    theta0: Vec<f64>,
    k: u64,
    theta: Vec<f64>,
    hessian: DMatrix<f64>,
    resets: usize,
    last_direction: DVector<f64>,
}

impl Estimator {
    pub fn new(config: EstimatorConfig, constraints: ConstraintSet, theta0: Vec<f64>) -> Result<Self> {
        config.validate()?;
        if !constraints.contains(&theta0) {
            return Err(Error::Constraint(format!(
                "initial estimate {theta0:?} is outside {}",
                constraints.description()
            )));
        }
        let d = theta0.len();
        let hessian = DMatrix::identity(d, d) * config.hessian_scale;
        Ok(Self {
            config,
            constraints,
            theta: theta0.clone(),
            theta0,
            k: 0,
            hessian,
            resets: 0,
            last_direction: DVector::zeros(d),
        })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn step_index(&self) -> u64 {
        self.k
    }

    pub fn resets(&self) -> usize {
        self.resets
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.config
    }

    /// `R_k^{-1} ψ̄_k ε_k` from the most recent update.
    pub fn last_direction(&self) -> &[f64] {
        self.last_direction.as_slice()
    }

    /// Advances the step counter without touching the estimate, for samples
    /// consumed before the first update.
    pub fn skip_step(&mut self) {
        self.k += 1;
    }

    /// One Newton step with the predictor output for step `k`.
    pub fn update(&mut self, psi_bar: &[f64], eps: f64) -> Result<EstimatorSnapshot> {
        let d = self.theta.len();
        if psi_bar.len() != d {
            return Err(Error::input(format!("gradient has {} entries, expected {d}", psi_bar.len())));
        }
        let k = self.k + 1;
        let g = gain(k, &self.config);
        let psi = DVector::from_column_slice(psi_bar);
        let outer = &psi * psi.transpose();
        let mut hessian = &self.hessian + (outer - &self.hessian) * g;
        hessian = (&hessian + hessian.transpose()) * 0.5;

        let outcome = solve_hessian(&hessian, &(&psi * eps)).and_then(|direction| {
            let candidate: Vec<f64> =
                self.theta.iter().zip(direction.iter()).map(|(t, s)| t + g * s).collect();
            if candidate.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence { step: k as usize, reason: "non-finite parameter update".into() });
            }
            let (theta, hit) = project(&candidate, &self.theta, &self.constraints)?;
            let norm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > self.config.max_norm {
                return Err(Error::Divergence {
                    step: k as usize,
                    reason: format!("estimate norm {norm:.3e} exceeds {:.3e}", self.config.max_norm),
                });
            }
            Ok((theta, hit, direction))
        });

        let (theta, hit) = match outcome {
            Ok((theta, hit, direction)) => {
                self.last_direction = direction;
                self.hessian = hessian;
                (theta, hit)
            }
            Err(err) => {
                let err = match err {
                    Error::Divergence { reason, .. } => Error::Divergence { step: k as usize, reason },
                    other => other,
                };
                match (self.config.divergence, &err) {
                    (DivergencePolicy::Reset, Error::Divergence { .. }) => {
                        self.resets += 1;
                        self.hessian = DMatrix::identity(d, d) * self.config.hessian_scale;
                        self.last_direction = DVector::zeros(d);
                        (self.theta0.clone(), false)
                    }
                    _ => return Err(err),
                }
            }
        };
        self.theta = theta;
        self.k = k;
        Ok(EstimatorSnapshot {
            k,
            theta: self.theta.clone(),
            hessian: self.hessian.transpose().as_slice().to_vec(),
            eps,
            psi_norm: psi.norm(),
            projection_hit: hit,
        })
    }
}
