use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Rational transfer operator
///
/// ```text
///            c_0 + c_1 p + ... + c_m p^m
/// G(p) = -------------------------------------
///         p^n + d_{n-1} p^{n-1} + ... + d_0
/// ```
///
/// Coefficients are stored in ascending powers of `p`; the leading denominator
/// coefficient is the implicit 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransferOperator {
    numerator: Vec<f64>,
    denominator: Vec<f64>,
}

impl TransferOperator {
    pub fn new(numerator: Vec<f64>, denominator: Vec<f64>) -> Result<Self> {
        if denominator.is_empty() {
            return Err(Error::input("transfer operator needs n >= 1"));
        }
        if numerator.is_empty() || numerator.len() > denominator.len() + 1 {
            return Err(Error::input(format!(
                "numerator order {} exceeds denominator order {}",
                numerator.len() as isize - 1,
                denominator.len()
            )));
        }
        if numerator.iter().chain(&denominator).any(|c| !c.is_finite()) {
            return Err(Error::input("transfer operator coefficients must be finite"));
        }
        Ok(Self { numerator, denominator })
    }

    /// `c_0..c_m`
    pub fn numerator(&self) -> &[f64] {
        &self.numerator
    }

    /// `d_0..d_{n-1}`
    pub fn denominator(&self) -> &[f64] {
        &self.denominator
    }

    pub fn order(&self) -> usize {
        self.denominator.len()
    }

    pub fn numerator_order(&self) -> usize {
        self.numerator.len() - 1
    }

    pub fn is_strictly_proper(&self) -> bool {
        self.numerator.len() <= self.denominator.len()
    }

    /// Full monic denominator in ascending powers, `[d_0, ..., d_{n-1}, 1]`.
    pub fn monic_denominator(&self) -> Vec<f64> {
        let mut d = self.denominator.clone();
        d.push(1.0);
        d
    }

    /// Roots of the denominator polynomial.
    pub fn poles(&self) -> Vec<(f64, f64)> {
        let n = self.order();
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        for (i, d) in self.denominator.iter().enumerate() {
            companion[(i, n - 1)] = -d;
        }
        companion.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect()
    }
}

/// True iff every pole has real part below `-1e-12`.
pub fn stability_check(op: &TransferOperator) -> bool {
    match op.denominator() {
        [d0] => *d0 > 1e-12,
        [d0, d1] => {
            // p^2 + d1 p + d0: closed form avoids the eigen solver on the hot path.
            let disc = d1 * d1 - 4.0 * d0;
            let max_re = if disc >= 0.0 { (-d1 + disc.sqrt()) / 2.0 } else { -d1 / 2.0 };
            max_re < -1e-12
        }
        _ => op.poles().iter().all(|(re, _)| *re < -1e-12),
    }
}

/// Product of two polynomials in ascending powers.
pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Where a parameter enters a transfer operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefficientRole {
    /// `c_i`, 0-based power of `p`.
    Numerator(usize),
    /// `d_i`, 0-based power of `p`.
    Denominator(usize),
}

/// Maps entries of `θ` onto the coefficients of a [`TransferOperator`].
///
/// `numerator[i]` is the index in `θ` of `c_i`; `denominator[i]` the index of `d_i`.
/// Numerator coefficients are indexed from 0, so the gradient filter of `c_i` is
/// `p^i / (p^n + Σ d_j p^j)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TfParameterization {
    pub numerator: Vec<usize>,
    pub denominator: Vec<usize>,
}

impl TfParameterization {
    pub fn operator(&self, theta: &[f64]) -> Result<TransferOperator> {
        let pick = |idx: &[usize]| -> Result<Vec<f64>> {
            idx.iter()
                .map(|&i| {
                    theta
                        .get(i)
                        .copied()
                        .ok_or_else(|| Error::input(format!("parameter index {i} out of range")))
                })
                .collect()
        };
        TransferOperator::new(pick(&self.numerator)?, pick(&self.denominator)?)
    }

    pub fn role(&self, j: usize) -> Option<CoefficientRole> {
        if let Some(i) = self.numerator.iter().position(|&k| k == j) {
            return Some(CoefficientRole::Numerator(i));
        }
        self.denominator.iter().position(|&k| k == j).map(CoefficientRole::Denominator)
    }

    pub fn order(&self) -> usize {
        self.denominator.len()
    }
}
