use nalgebra::DMatrix;

use super::expm::expm;
use crate::model::DisturbanceSde;
use crate::{Error, Result};

/// Exact one-step sampling of `dw = A w dt + B dβ` over an interval `Δ`:
/// `w⁺ = A_Δ w + B_Δ ξ`, `ξ ~ N(0, I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteSdeStep {
    pub a_delta: DMatrix<f64>,
    /// Lower-triangular square root of the step covariance.
    pub b_delta: DMatrix<f64>,
    pub delta: f64,
}

/// Exact sampling of the augmented gradient SDE `dζ = F ζ dt + L dβ` with
/// `F = [[A, 0], [A_j, A]]` and `L = [B; B_j]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSdeStep {
    pub f_delta: DMatrix<f64>,
    pub l_delta: DMatrix<f64>,
    pub delta: f64,
}

fn check_finite(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::input(format!("{what} has non-finite entries")))
    }
}

/// `(e^{AΔ}, ∫_0^Δ e^{As} B Bᵀ e^{Aᵀs} ds)` from one block exponential of
/// `[[-A, BBᵀ], [0, Aᵀ]] Δ`.
pub fn van_loan_cov(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    delta: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    if !a.is_square() || b.nrows() != n {
        return Err(Error::input("van Loan: A must be n x n and B must have n rows"));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::input(format!("van Loan: step must be positive, got {delta}")));
    }
    check_finite(a, "drift")?;
    check_finite(b, "dispersion")?;
    let mut block = DMatrix::zeros(2 * n, 2 * n);
    block.view_mut((0, 0), (n, n)).copy_from(&(-a * delta));
    block.view_mut((0, n), (n, n)).copy_from(&(b * b.transpose() * delta));
    block.view_mut((n, n), (n, n)).copy_from(&(a.transpose() * delta));
    let e = expm(&block);
    let f22 = e.view((n, n), (n, n)).into_owned();
    let f12 = e.view((0, n), (n, n)).into_owned();
    let a_delta = f22.transpose();
    let q = &a_delta * f12;
    let q = (&q + q.transpose()) * 0.5;
    Ok((a_delta, q))
}

fn scale_of(q: &DMatrix<f64>) -> f64 {
    q.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Square root `S` with `S Sᵀ = Q`.
///
/// A lower-triangular factor is always attempted first, treating pivots within
/// round-off of zero as exact zeros, so rank-deficient covariances keep the
/// triangular structure. If that factor does not reproduce `Q` the symmetric
/// eigendecomposition root is used instead. Eigenvalues in `[-1e-10‖Q‖, 0)` are
/// clipped to zero; anything more negative is an error.
pub fn cov_sqrt(q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !q.is_square() {
        return Err(Error::input("covariance must be square"));
    }
    check_finite(q, "covariance")?;
    let n = q.nrows();
    let scale = scale_of(q);
    if scale == 0.0 {
        return Ok(DMatrix::zeros(n, n));
    }
    if (q - q.transpose()).amax() > 1e-10 * scale {
        return Err(Error::input("covariance is not symmetric"));
    }
    if let Some(l) = semidefinite_cholesky(q, scale) {
        let resid = (&l * l.transpose() - q).amax();
        if resid <= 1e-9 * scale {
            return Ok(l);
        }
    }
    eigen_sqrt(q, scale)
}

fn semidefinite_cholesky(q: &DMatrix<f64>, scale: f64) -> Option<DMatrix<f64>> {
    let n = q.nrows();
    let zero_pivot = 1e-13 * scale;
    let neg_limit = -1e-10 * scale;
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = q[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < neg_limit {
            return None;
        }
        if d <= zero_pivot {
            continue;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = q[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

fn eigen_sqrt(q: &DMatrix<f64>, scale: f64) -> Result<DMatrix<f64>> {
    let eig = q.clone().symmetric_eigen();
    let tolerance = 1e-10 * scale;
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -tolerance {
        return Err(Error::NotPsd { eigenvalue: min, tolerance });
    }
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// Exact sampling matrices of the disturbance SDE at `θ`.
pub fn sde_discretize(sde: &DisturbanceSde, theta: &[f64], delta: f64) -> Result<DiscreteSdeStep> {
    let (a_delta, q) = van_loan_cov(&sde.a(theta), &sde.b(theta), delta)?;
    let b_delta = cov_sqrt(&q)?;
    Ok(DiscreteSdeStep { a_delta, b_delta, delta })
}

/// Drift and dispersion of the augmented state `[w; ∂w/∂θ_j]`.
pub fn gradient_sde_matrices(
    sde: &DisturbanceSde,
    theta: &[f64],
    j: usize,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if j >= theta.len() {
        return Err(Error::input(format!("parameter index {j} out of range")));
    }
    let n = sde.state_dim();
    let q = sde.noise_dim();
    let a = sde.a(theta);
    let mut f = DMatrix::zeros(2 * n, 2 * n);
    f.view_mut((0, 0), (n, n)).copy_from(&a);
    f.view_mut((n, 0), (n, n)).copy_from(&sde.a_jacobian(theta, j));
    f.view_mut((n, n), (n, n)).copy_from(&a);
    let mut l = DMatrix::zeros(2 * n, q);
    l.view_mut((0, 0), (n, q)).copy_from(&sde.b(theta));
    l.view_mut((n, 0), (n, q)).copy_from(&sde.b_jacobian(theta, j));
    Ok((f, l))
}

/// Exact sampling matrices of the gradient SDE for parameter `j` (0-based).
pub fn gradient_sde_discretize(
    sde: &DisturbanceSde,
    theta: &[f64],
    j: usize,
    delta: f64,
) -> Result<GradientSdeStep> {
    let (f, l) = gradient_sde_matrices(sde, theta, j)?;
    let (f_delta, q) = van_loan_cov(&f, &l, delta)?;
    let l_delta = cov_sqrt(&q)?;
    Ok(GradientSdeStep { f_delta, l_delta, delta })
}
