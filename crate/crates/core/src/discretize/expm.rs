//! Matrix exponential by scaling and squaring with diagonal Padé approximants.
//!
//! Order selection and the θ_m thresholds follow Higham, "The scaling and squaring
//! method for the matrix exponential revisited" (SIAM J. Matrix Anal. Appl., 2005).

use nalgebra::DMatrix;

use crate::{Error, Result};

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA3: f64 = 1.495585217958292e-2;
const THETA5: f64 = 2.539398330063230e-1;
const THETA7: f64 = 9.504178996162932e-1;
const THETA9: f64 = 2.097847961257068e0;
const THETA13: f64 = 5.371920351148152e0;

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `e^{At}`.
pub fn mat_exp(a: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
    if !a.is_square() {
        return Err(Error::input("matrix exponential of a non-square matrix"));
    }
    if !t.is_finite() || t < 0.0 {
        return Err(Error::input(format!("exponential time must be finite and >= 0, got {t}")));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("matrix exponential of a non-finite matrix"));
    }
    Ok(expm(&(a * t)))
}

/// `e^A` without input validation. Non-finite input gives non-finite output.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    match n {
        0 => return DMatrix::zeros(0, 0),
        1 => return DMatrix::from_element(1, 1, a[(0, 0)].exp()),
        _ => {}
    }
    let norm = one_norm(a);
    if norm == 0.0 {
        return DMatrix::identity(n, n);
    }
    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = a * a;

    let low_order = [(THETA3, &B3[..]), (THETA5, &B5[..]), (THETA7, &B7[..]), (THETA9, &B9[..])];
    for (theta, b) in low_order {
        if norm <= theta {
            return low_order_pade(a, &a2, &ident, b);
        }
    }

    let s = if norm > THETA13 { (norm / THETA13).log2().ceil().max(0.0) as i32 } else { 0 };
    let scale = 2f64.powi(-s);
    let a1 = a * scale;
    let a2 = &a2 * (scale * scale);
    let a4 = &a2 * &a2;
    let a6 = &a2 * &a4;
    let b = &B13;
    let u_inner = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = &a1 * (&a6 * u_inner + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let v_inner = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * v_inner + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    let mut r = solve_pade(&u, &v);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn low_order_pade(
    a: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    ident: &DMatrix<f64>,
    b: &[f64],
) -> DMatrix<f64> {
    let mut u_sum = ident * b[1];
    let mut v = ident * b[0];
    let mut power = ident.clone();
    for pair in b[2..].chunks(2) {
        power = &power * a2;
        v += &power * pair[0];
        if let Some(odd) = pair.get(1) {
            u_sum += &power * *odd;
        }
    }
    let u = a * u_sum;
    solve_pade(&u, &v)
}

fn solve_pade(u: &DMatrix<f64>, v: &DMatrix<f64>) -> DMatrix<f64> {
    let p = v + u;
    let q = v - u;
    q.lu().solve(&p).unwrap_or_else(|| DMatrix::from_element(p.nrows(), p.ncols(), f64::NAN))
}
