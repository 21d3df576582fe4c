use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `u(t) = Σ_ℓ A_ℓ cos(ω_ℓ t + φ_ℓ)`, generated by an autonomous oscillator bank.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Multisine {
    pub amplitudes: Vec<f64>,
    /// rad/s
    pub frequencies: Vec<f64>,
    /// rad
    pub phases: Vec<f64>,
}

impl Multisine {
    pub fn new(amplitudes: Vec<f64>, frequencies: Vec<f64>, phases: Vec<f64>) -> Result<Self> {
        if amplitudes.len() != frequencies.len() || amplitudes.len() != phases.len() {
            return Err(Error::input("multisine component lists differ in length"));
        }
        Ok(Self { amplitudes, frequencies, phases })
    }

    pub fn zero() -> Self {
        Self { amplitudes: Vec::new(), frequencies: Vec::new(), phases: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn value(&self, t: f64) -> f64 {
        self.amplitudes
            .iter()
            .zip(&self.frequencies)
            .zip(&self.phases)
            .map(|((a, w), p)| a * (w * t + p).cos())
            .sum()
    }

    /// Oscillator state `e(t) = [cos(ω_ℓ t + φ_ℓ), sin(ω_ℓ t + φ_ℓ)]_ℓ`.
    pub fn state(&self, t: f64) -> DVector<f64> {
        let mut e = DVector::zeros(2 * self.len());
        for (l, (w, p)) in self.frequencies.iter().zip(&self.phases).enumerate() {
            let (s, c) = (w * t + p).sin_cos();
            e[2 * l] = c;
            e[2 * l + 1] = s;
        }
        e
    }

    /// Generator `S` with `ė = S e`.
    pub fn generator(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(2 * self.len(), 2 * self.len());
        for (l, w) in self.frequencies.iter().enumerate() {
            s[(2 * l, 2 * l + 1)] = -w;
            s[(2 * l + 1, 2 * l)] = *w;
        }
        s
    }

    /// Output row `H` with `u = H e`.
    pub fn output_row(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(1, 2 * self.len());
        for (l, a) in self.amplitudes.iter().enumerate() {
            h[(0, 2 * l)] = *a;
        }
        h
    }
}

/// The continuous-time input with its known inter-sample behaviour.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InputSignal {
    /// `values[k]` is held on `[breakpoints[k], breakpoints[k+1])`; the last value
    /// is held forever.
    PiecewiseConstant { breakpoints: Vec<f64>, values: Vec<f64> },
    Exosystem(Multisine),
}

impl InputSignal {
    pub fn piecewise_constant(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if breakpoints.len() != values.len() || breakpoints.is_empty() {
            return Err(Error::input("need one value per breakpoint"));
        }
        if breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::input("breakpoints must be strictly increasing"));
        }
        Ok(Self::PiecewiseConstant { breakpoints, values })
    }

    /// `u(t)`. Before the first breakpoint a piecewise-constant signal is 0.
    pub fn value(&self, t: f64) -> f64 {
        match self {
            InputSignal::Exosystem(ms) => ms.value(t),
            InputSignal::PiecewiseConstant { breakpoints, values } => {
                let idx = breakpoints.partition_point(|&b| b <= t);
                if idx == 0 {
                    0.0
                } else {
                    values[idx - 1]
                }
            }
        }
    }
}
