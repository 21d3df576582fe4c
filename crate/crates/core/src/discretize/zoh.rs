use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::expm::expm;
use crate::model::{poly_mul, CoefficientRole, TfParameterization, TransferOperator};
use crate::{Error, Result};

/// Sampled-data transfer function
/// `G_Δ(z⁻¹) = Σ_{r=1}^n b_r z^{-r} / (1 + Σ_{r=1}^n a_r z^{-r})`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteArx {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

impl DiscreteArx {
    pub fn order(&self) -> usize {
        self.a.len()
    }

    /// One step of the difference equation given past outputs `z_{k-1}..z_{k-n}` and
    /// past inputs `u_{k-1}..u_{k-n}`, most recent first.
    pub fn step(&self, past_outputs: &[f64], past_inputs: &[f64]) -> f64 {
        let ar: f64 = self.a.iter().zip(past_outputs).map(|(a, z)| a * z).sum();
        let ma: f64 = self.b.iter().zip(past_inputs).map(|(b, u)| b * u).sum();
        ma - ar
    }

    /// Response to `inputs[k]` held on `[kΔ, (k+1)Δ)` from rest: returns
    /// `z_1..z_N` with `z_k` the output at `kΔ`.
    pub fn simulate(&self, inputs: &[f64]) -> Vec<f64> {
        let n = self.order();
        let mut z_hist = vec![0.0; n];
        let mut u_hist = vec![0.0; n];
        let mut out = Vec::with_capacity(inputs.len());
        for &u in inputs {
            u_hist.rotate_right(1);
            if n > 0 {
                u_hist[0] = u;
            }
            let z = self.step(&z_hist, &u_hist);
            z_hist.rotate_right(1);
            if n > 0 {
                z_hist[0] = z;
            }
            out.push(z);
        }
        out
    }

    /// Roots of `z^n + a_1 z^{n-1} + ... + a_n`.
    pub fn poles(&self) -> Vec<(f64, f64)> {
        let n = self.order();
        if n == 0 {
            return Vec::new();
        }
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for (i, a) in self.a.iter().enumerate() {
            companion[(0, i)] = -a;
        }
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        companion.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect()
    }
}

/// Controllable canonical realization `(A, B, C)` of a strictly proper operator.
pub fn controllable_realization(
    op: &TransferOperator,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    if !op.is_strictly_proper() {
        return Err(Error::input(
            "zero-order-hold sampling into a strictly proper ARX form needs m < n",
        ));
    }
    let n = op.order();
    let mut a = DMatrix::zeros(n, n);
    for i in 0..n - 1 {
        a[(i, i + 1)] = 1.0;
    }
    for (i, d) in op.denominator().iter().enumerate() {
        a[(n - 1, i)] = -d;
    }
    let mut b = DMatrix::zeros(n, 1);
    b[(n - 1, 0)] = 1.0;
    let mut c = DMatrix::zeros(1, n);
    for (i, v) in op.numerator().iter().enumerate() {
        c[(0, i)] = *v;
    }
    Ok((a, b, c))
}

/// `(Φ, Γ)` with `x⁺ = Φ x + Γ u` for input held constant over `Δ`.
pub fn zoh_matrices(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    delta: f64,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let q = b.ncols();
    let mut block = DMatrix::zeros(n + q, n + q);
    block.view_mut((0, 0), (n, n)).copy_from(&(a * delta));
    block.view_mut((0, n), (n, q)).copy_from(&(b * delta));
    let e = expm(&block);
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, q)).into_owned())
}

/// Coefficients `[a_1..a_n]` of `det(zI - M) = z^n + a_1 z^{n-1} + ... + a_n`
/// (Faddeev–LeVerrier).
pub fn characteristic_polynomial(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut coeffs = Vec::with_capacity(n);
    let ident = DMatrix::<f64>::identity(n, n);
    let mut aux = DMatrix::<f64>::zeros(n, n);
    let mut c_prev = 1.0;
    for k in 1..=n {
        aux = m * &aux + &ident * c_prev;
        let c = -(m * &aux).trace() / k as f64;
        coeffs.push(c);
        c_prev = c;
    }
    coeffs
}

/// Difference-equation coefficients of a single-input single-output discrete
/// state-space `(Φ, Γ, C)` via its characteristic polynomial and Markov parameters.
pub fn state_space_to_arx(
    phi: &DMatrix<f64>,
    gamma: &DMatrix<f64>,
    c: &DMatrix<f64>,
) -> DiscreteArx {
    let n = phi.nrows();
    let a = characteristic_polynomial(phi);
    let mut markov = Vec::with_capacity(n);
    let mut v = gamma.clone();
    for _ in 0..n {
        markov.push((c * &v)[(0, 0)]);
        v = phi * v;
    }
    let b = (1..=n)
        .map(|r| {
            (1..=r)
                .map(|i| {
                    let ar = if r == i { 1.0 } else { a[r - i - 1] };
                    ar * markov[i - 1]
                })
                .sum()
        })
        .collect();
    DiscreteArx { a, b }
}

/// Zero-order-hold sampling of a strictly proper transfer operator.
pub fn zoh_discretize(op: &TransferOperator, delta: f64) -> Result<DiscreteArx> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::input(format!("sampling interval must be positive, got {delta}")));
    }
    let (a, b, c) = controllable_realization(op)?;
    let (phi, gamma) = zoh_matrices(&a, &b, delta);
    Ok(state_space_to_arx(&phi, &gamma, &c))
}

/// `∂G/∂θ_j` as a rational operator.
///
/// For `c_i` this is `p^i / D(p)`; for `d_i` it is `-p^i N(p) / D(p)²`.
pub fn gradient_operator(op: &TransferOperator, role: CoefficientRole) -> Result<TransferOperator> {
    let n = op.order();
    match role {
        CoefficientRole::Numerator(i) => {
            let mut num = vec![0.0; i + 1];
            num[i] = 1.0;
            TransferOperator::new(num, op.denominator().to_vec())
        }
        CoefficientRole::Denominator(i) => {
            if i >= n {
                return Err(Error::input(format!("denominator coefficient d_{i} with n = {n}")));
            }
            let mut shift = vec![0.0; i + 1];
            shift[i] = -1.0;
            let num = poly_mul(&shift, op.numerator());
            let den_full = poly_mul(&op.monic_denominator(), &op.monic_denominator());
            TransferOperator::new(num, den_full[..2 * n].to_vec())
        }
    }
}

/// ZOH sampling of the gradient filter for parameter `j` of a parameterized operator.
pub fn gradient_tf_discretize(
    param: &TfParameterization,
    theta: &[f64],
    j: usize,
    delta: f64,
) -> Result<DiscreteArx> {
    let role = param
        .role(j)
        .ok_or_else(|| Error::input(format!("parameter {j} is not a transfer-operator coefficient")))?;
    let op = param.operator(theta)?;
    zoh_discretize(&gradient_operator(&op, role)?, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::expm::mat_exp;

    /// Fine-grid RK4 response of a controllable realization to a held step sequence.
    fn fine_grid_response(op: &TransferOperator, inputs: &[f64], delta: f64, dt: f64) -> Vec<f64> {
        let (a, b, c) = controllable_realization(op).unwrap();
        let n = a.nrows();
        let mut x = nalgebra::DVector::<f64>::zeros(n);
        let sub = (delta / dt).round() as usize;
        let h = delta / sub as f64;
        let mut out = Vec::new();
        for &u in inputs {
            let bu = b.column(0) * u;
            for _ in 0..sub {
                let f = |x: &nalgebra::DVector<f64>| &a * x + &bu;
                let k1 = f(&x);
                let k2 = f(&(&x + &k1 * (h / 2.0)));
                let k3 = f(&(&x + &k2 * (h / 2.0)));
                let k4 = f(&(&x + &k3 * h));
                x += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            }
            out.push((&c * &x)[(0, 0)]);
        }
        out
    }

    #[test]
    fn first_order_lag() {
        let op = TransferOperator::new(vec![1.0], vec![1.0]).unwrap();
        let arx = zoh_discretize(&op, 0.5).unwrap();
        let e = (-0.5f64).exp();
        assert!((arx.a[0] + e).abs() < 1e-15);
        assert!((arx.b[0] - (1.0 - e)).abs() < 1e-15);
        assert!((arx.a[0] + 0.6065307).abs() < 1e-7);
        assert!((arx.b[0] - 0.3934693).abs() < 1e-7);
    }

    #[test]
    fn second_order_matches_fine_grid() {
        let op = TransferOperator::new(vec![1.0], vec![0.27, 1.2]).unwrap();
        let arx = zoh_discretize(&op, 0.5).unwrap();
        let inputs: Vec<f64> = (0..40).map(|k| if (k / 3) % 2 == 0 { 5.0 } else { -5.0 }).collect();
        let exact = arx.simulate(&inputs);
        let fine = fine_grid_response(&op, &inputs, 0.5, 1e-5);
        for (e, f) in exact.iter().zip(&fine) {
            assert!((e - f).abs() < 1e-8, "{e} vs {f}");
        }
        // step response at the samples equals the augmented-exponential oracle
        let (a, b, c) = controllable_realization(&op).unwrap();
        let mut aug = DMatrix::zeros(3, 3);
        aug.view_mut((0, 0), (2, 2)).copy_from(&a);
        aug.view_mut((0, 2), (2, 1)).copy_from(&b);
        let step = arx.simulate(&[1.0; 6]);
        for (k, z) in step.iter().enumerate() {
            let e = mat_exp(&aug, 0.5 * (k + 1) as f64).unwrap();
            let x = e.view((0, 2), (2, 1)).into_owned();
            assert!(((&c * x)[(0, 0)] - z).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_numerator_gives_zero_b() {
        let op = TransferOperator::new(vec![0.0, 0.0], vec![0.27, 1.2]).unwrap();
        let arx = zoh_discretize(&op, 0.5).unwrap();
        assert!(arx.b.iter().all(|b| *b == 0.0));
    }

    #[test]
    fn stable_operator_gives_poles_inside_unit_circle() {
        let op = TransferOperator::new(vec![1.0, 0.5], vec![0.27, 1.2]).unwrap();
        for delta in [0.01, 0.5, 3.0] {
            let arx = zoh_discretize(&op, delta).unwrap();
            assert!(arx.poles().iter().all(|(re, im)| (re * re + im * im).sqrt() < 1.0));
        }
    }

    #[test]
    fn biproper_and_bad_delta_rejected() {
        let op = TransferOperator::new(vec![1.0, 1.0], vec![1.0]).unwrap();
        assert!(zoh_discretize(&op, 0.5).is_err());
        let op = TransferOperator::new(vec![1.0], vec![1.0]).unwrap();
        assert!(zoh_discretize(&op, 0.0).is_err());
    }

    #[test]
    fn numerator_gradient_of_first_order() {
        // G = c / (p + d0), θ = [c, d0]
        let param = TfParameterization { numerator: vec![0], denominator: vec![1] };
        let arx = gradient_tf_discretize(&param, &[2.0, 1.0], 0, 0.5).unwrap();
        let e = (-0.5f64).exp();
        assert!((arx.a[0] + e).abs() < 1e-15);
        assert!((arx.b[0] - (1.0 - e)).abs() < 1e-15);
        assert!(gradient_tf_discretize(&param, &[2.0, 1.0, 7.0], 2, 0.5).is_err());
    }

    #[test]
    fn denominator_gradient_matches_finite_differences() {
        let param = TfParameterization { numerator: vec![0], denominator: vec![1] };
        let theta = [2.0, 1.0];
        let grad = gradient_tf_discretize(&param, &theta, 1, 0.5).unwrap();
        assert_eq!(grad.order(), 2);
        let inputs: Vec<f64> = (0..30).map(|k| ((k * 7 % 5) as f64) - 2.0).collect();
        let h = 1e-5;
        let plus = zoh_discretize(&param.operator(&[2.0, 1.0 + h]).unwrap(), 0.5).unwrap();
        let minus = zoh_discretize(&param.operator(&[2.0, 1.0 - h]).unwrap(), 0.5).unwrap();
        let (yp, ym) = (plus.simulate(&inputs), minus.simulate(&inputs));
        let yg = grad.simulate(&inputs);
        for k in 0..inputs.len() {
            let fd = (yp[k] - ym[k]) / (2.0 * h);
            assert!((yg[k] - fd).abs() <= 1e-3 * fd.abs().max(1e-3), "k={k}: {} vs {fd}", yg[k]);
        }
    }

    #[test]
    fn characteristic_polynomial_of_companion() {
        // (z - 0.5)(z - 0.2)(z + 0.1) = z^3 - 0.6 z^2 + 0.03 z + 0.01
        let m = DMatrix::from_row_slice(3, 3, &[0.6, -0.03, -0.01, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let c = characteristic_polynomial(&m);
        for (got, want) in c.iter().zip([-0.6, 0.03, 0.01]) {
            assert!((got - want).abs() < 1e-15);
        }
    }
}
