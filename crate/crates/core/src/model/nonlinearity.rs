use std::fmt;

/// Static output map `y = f(x; θ_f)`.
///
/// `params` is always the θ_f block of the parameter vector.
pub trait Nonlinearity: Send + Sync + fmt::Debug {
    fn param_count(&self) -> usize;

    fn value(&self, x: f64, params: &[f64]) -> f64;

    /// `∂f/∂x`
    fn dx(&self, x: f64, params: &[f64]) -> f64;

    /// Writes `∂f/∂θ_f[i]` into `out[i]`.
    fn dparams(&self, x: f64, params: &[f64], out: &mut [f64]);
}

/// `f(x) = x`
#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl Nonlinearity for Identity {
    fn param_count(&self) -> usize {
        0
    }

    fn value(&self, x: f64, _: &[f64]) -> f64 {
        x
    }

    fn dx(&self, _: f64, _: &[f64]) -> f64 {
        1.0
    }

    fn dparams(&self, _: f64, _: &[f64], _: &mut [f64]) {}
}

/// `f(x) = x²`
#[derive(Clone, Copy, Debug, Default)]
pub struct Square;

impl Nonlinearity for Square {
    fn param_count(&self) -> usize {
        0
    }

    fn value(&self, x: f64, _: &[f64]) -> f64 {
        x * x
    }

    fn dx(&self, x: f64, _: &[f64]) -> f64 {
        2.0 * x
    }

    fn dparams(&self, _: f64, _: &[f64], _: &mut [f64]) {}
}

/// Hill function `f(x; α) = 1 / (1 + |x|^α)`.
///
/// At `x = 0` both `∂f/∂x` and `∂f/∂α` are taken as 0, their limits for `α > 1`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Hill;

impl Nonlinearity for Hill {
    fn param_count(&self) -> usize {
        1
    }

    fn value(&self, x: f64, params: &[f64]) -> f64 {
        1.0 / (1.0 + x.abs().powf(params[0]))
    }

    fn dx(&self, x: f64, params: &[f64]) -> f64 {
        let alpha = params[0];
        let ax = x.abs();
        if ax == 0.0 {
            return 0.0;
        }
        let p = ax.powf(alpha);
        let denom = 1.0 + p;
        -alpha * (p / ax) * x.signum() / (denom * denom)
    }

    fn dparams(&self, x: f64, params: &[f64], out: &mut [f64]) {
        let ax = x.abs();
        if ax == 0.0 {
            out[0] = 0.0;
            return;
        }
        let p = ax.powf(params[0]);
        let denom = 1.0 + p;
        out[0] = -p * ax.ln() / (denom * denom);
    }
}
