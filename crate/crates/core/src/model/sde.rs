use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

/// A parameter-dependent matrix `θ ↦ M(θ)` with its entry-wise partial derivatives.
pub trait MatrixMap: Send + Sync + fmt::Debug {
    fn shape(&self) -> (usize, usize);

    fn eval(&self, theta: &[f64]) -> DMatrix<f64>;

    /// `∂M/∂θ_j`, zero when `θ_j` does not enter.
    fn jacobian(&self, theta: &[f64], j: usize) -> DMatrix<f64>;
}

/// `M(θ) = M_0 + Σ_j θ_j M_j`.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap {
    constant: DMatrix<f64>,
    terms: Vec<(usize, DMatrix<f64>)>,
}

impl AffineMap {
    pub fn constant(m: DMatrix<f64>) -> Self {
        Self { constant: m, terms: Vec::new() }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::constant(DMatrix::zeros(rows, cols))
    }

    /// A 1×1 map equal to `θ[index]`.
    pub fn scalar_param(index: usize) -> Self {
        Self::zeros(1, 1).with_term(index, DMatrix::from_element(1, 1, 1.0))
    }

    pub fn with_term(mut self, index: usize, m: DMatrix<f64>) -> Self {
        assert_eq!(m.shape(), self.constant.shape(), "affine term shape mismatch");
        self.terms.push((index, m));
        self
    }
}

impl MatrixMap for AffineMap {
    fn shape(&self) -> (usize, usize) {
        self.constant.shape()
    }

    fn eval(&self, theta: &[f64]) -> DMatrix<f64> {
        let mut out = self.constant.clone();
        for (i, m) in &self.terms {
            out += m * theta[*i];
        }
        out
    }

    fn jacobian(&self, _theta: &[f64], j: usize) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.constant.nrows(), self.constant.ncols());
        for (i, m) in &self.terms {
            if *i == j {
                out += m;
            }
        }
        out
    }
}

/// Disturbance model `dw = A(θ) w dt + B(θ) dβ` observed through `C(θ) w`.
#[derive(Clone, Debug)]
pub struct DisturbanceSde {
    pub drift: Arc<dyn MatrixMap>,
    pub dispersion: Arc<dyn MatrixMap>,
    pub output: Arc<dyn MatrixMap>,
}

impl DisturbanceSde {
    pub fn new(
        drift: impl MatrixMap + 'static,
        dispersion: impl MatrixMap + 'static,
        output: impl MatrixMap + 'static,
    ) -> Self {
        let n = drift.shape().0;
        assert_eq!(drift.shape(), (n, n), "drift must be square");
        assert_eq!(dispersion.shape().0, n, "dispersion rows must match the state");
        assert_eq!(output.shape(), (1, n), "output must be 1 x n_w");
        Self { drift: Arc::new(drift), dispersion: Arc::new(dispersion), output: Arc::new(output) }
    }

    pub fn state_dim(&self) -> usize {
        self.drift.shape().0
    }

    pub fn noise_dim(&self) -> usize {
        self.dispersion.shape().1
    }

    pub fn a(&self, theta: &[f64]) -> DMatrix<f64> {
        self.drift.eval(theta)
    }

    pub fn b(&self, theta: &[f64]) -> DMatrix<f64> {
        self.dispersion.eval(theta)
    }

    pub fn c(&self, theta: &[f64]) -> DMatrix<f64> {
        self.output.eval(theta)
    }

    pub fn a_jacobian(&self, theta: &[f64], j: usize) -> DMatrix<f64> {
        self.drift.jacobian(theta, j)
    }

    pub fn b_jacobian(&self, theta: &[f64], j: usize) -> DMatrix<f64> {
        self.dispersion.jacobian(theta, j)
    }

    pub fn c_jacobian(&self, theta: &[f64], j: usize) -> DMatrix<f64> {
        self.output.jacobian(theta, j)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn central_difference(map: &dyn MatrixMap, theta: &[f64], j: usize) -> DMatrix<f64> {
        let h = 1e-6 * theta[j].abs().max(1.0);
        let mut plus = theta.to_vec();
        let mut minus = theta.to_vec();
        plus[j] += h;
        minus[j] -= h;
        (map.eval(&plus) - map.eval(&minus)) / (2.0 * h)
    }

    #[test]
    fn scalar_param_reads_theta() {
        let m = AffineMap::scalar_param(1);
        assert_eq!(m.eval(&[3.0, -2.0])[(0, 0)], -2.0);
        assert_eq!(m.jacobian(&[3.0, -2.0], 1)[(0, 0)], 1.0);
        assert_eq!(m.jacobian(&[3.0, -2.0], 0)[(0, 0)], 0.0);
    }

    proptest! {
        #[test]
        fn affine_jacobian_matches_finite_differences(
            t0 in -5.0f64..5.0, t1 in -5.0f64..5.0, t2 in -5.0f64..5.0,
        ) {
            let map = AffineMap::constant(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.5]))
                .with_term(0, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]))
                .with_term(2, DMatrix::from_row_slice(2, 2, &[0.0, -3.0, 1.0, 0.0]))
                .with_term(0, DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.0, 0.0]));
            let theta = [t0, t1, t2];
            for j in 0..3 {
                let fd = central_difference(&map, &theta, j);
                let an = map.jacobian(&theta, j);
                for (a, b) in an.iter().zip(fd.iter()) {
                    prop_assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0));
                }
            }
        }
    }
}
