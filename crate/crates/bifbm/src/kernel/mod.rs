//! Deterministic analytic core: the bi-fBm covariance and derived moments,
//! the heat kernel, the `H`-norm of integrands, and scanners for the
//! closed-form covariance inequalities.

mod hnorm;
mod scan;

pub use hnorm::{hnorm, hnorm_fn};
pub use scan::{lemma_scan, BoundKind, InequalityCheck, InequalityReport};

use crate::error::{Error, Result};
use crate::math::SQRT_2PI;
use crate::params::ModelParams;

/// Covariance `R(t, s) = 2^{-K} [ (t^{2H} + s^{2H})^K - |t - s|^{2HK} ]`.
///
/// Symmetric, `R(t, 0) = 0`, and `R(t, t) = t^{2HK} = t` on the critical
/// curve.
pub fn covariance(params: &ModelParams, s: f64, t: f64) -> Result<f64> {
    check_time("s", s)?;
    check_time("t", t)?;
    let two_h = 2.0 * params.h();
    let k = params.k();
    let sum = t.powf(two_h) + s.powf(two_h);
    Ok((-k).exp2() * (sum.powf(k) - (t - s).abs().powf(two_h * k)))
}

/// Increment covariance `E[(B_t - B_s)(B_{t2} - B_{s2})]` by bilinear
/// expansion of the covariance over the four corners.
pub fn increment_covariance(
    params: &ModelParams,
    s: f64,
    t: f64,
    s2: f64,
    t2: f64,
) -> Result<f64> {
    if t.is_nan() || t <= s {
        return Err(Error::domain(format!("degenerate interval [{s}, {t}]")));
    }
    if t2.is_nan() || t2 <= s2 {
        return Err(Error::domain(format!("degenerate interval [{s2}, {t2}]")));
    }
    Ok(covariance(params, t, t2)? - covariance(params, t, s2)? - covariance(params, s, t2)?
        + covariance(params, s, s2)?)
}

/// Joint second moments of `(B_s, B_r)` for `s >= r`:
/// `mu = E[B_s B_r]` and `rho2 = s r - mu^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mu: f64,
    pub rho2: f64,
    pub s: f64,
    pub r: f64,
}

/// Order matters: `s >= r >= 0` is required, arguments are never swapped.
pub fn moments(params: &ModelParams, s: f64, r: f64) -> Result<Moments> {
    check_time("r", r)?;
    if s < r {
        return Err(Error::domain(format!("moments requires s >= r, got s = {s} < r = {r}")));
    }
    let mu = covariance(params, s, r)?;
    Ok(Moments {
        mu,
        rho2: s * r - mu * mu,
        s,
        r,
    })
}

/// Heat kernel `phi_s(x) = exp(-x^2 / 2s) / sqrt(2 pi s)` for `s > 0`.
pub fn heat_kernel(s: f64, x: f64) -> Result<f64> {
    if !s.is_finite() || s <= 0.0 {
        return Err(Error::domain(format!("heat kernel needs s > 0, got {s}")));
    }
    Ok((-x * x / (2.0 * s)).exp() / (SQRT_2PI * s.sqrt()))
}

/// Checks the elementary inequalities
/// `(1+x)^alpha <= 1 + (2^alpha - 1) x^alpha` and
/// `(1+x)^beta >= 1 + (2^beta - 1) x^beta`
/// on a uniform grid over `[0, 1]`, with tolerance `1e-12`.
pub fn elementary_inequality_check(alpha: f64, beta: f64, grid: usize) -> Result<bool> {
    if !(0.0..=1.0).contains(&alpha) || !alpha.is_finite() {
        return Err(Error::domain(format!("alpha = {alpha} outside [0, 1]")));
    }
    if beta < 1.0 || !beta.is_finite() {
        return Err(Error::domain(format!("beta = {beta} below 1")));
    }
    if grid < 2 {
        return Err(Error::domain("grid must have at least 2 points".to_string()));
    }
    let ca = alpha.exp2() - 1.0;
    let cb = beta.exp2() - 1.0;
    let n = grid - 1;
    for i in 0..=n {
        let x = i as f64 / n as f64;
        if (1.0 + x).powf(alpha) > 1.0 + ca * x.powf(alpha) + 1e-12 {
            return Ok(false);
        }
        if (1.0 + x).powf(beta) < 1.0 + cb * x.powf(beta) - 1e-12 {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_time(name: &str, v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        Err(Error::domain(format!("time {name} = {v} must be finite and non-negative")))
    } else {
        Ok(())
    }
}
