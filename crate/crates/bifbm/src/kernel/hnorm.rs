//! The norm of the integrand space:
//!
//! ```text
//! ||f||^2 = int_0^T int_R |f(x)|^2 phi_s(x) dx ds
//!         + int_0^T int_R |f(x) x|^2 phi_s(x) dx ds / s
//! ```
//!
//! For a step function both x-integrals reduce to Gaussian distribution
//! functions and truncated second moments, leaving a single s-integral.
//! The `1/s` factor of the second term cancels against the variance scaling
//! of the truncated second moment, so the integrand stays bounded; the
//! substitution `s = u^2` removes the residual stiffness near `s = 0`.

use crate::error::{Error, Result};
use crate::function::StepFunction;
use crate::math::{adaptive_simpson, composite_simpson, gauss_second_moment_cdf, norm_cdf};

const S_REL_TOL: f64 = 1e-8;

/// `||f||` for a step function over the horizon `[0, T]`.
pub fn hnorm(f: &StepFunction, t_horizon: f64) -> Result<f64> {
    check_horizon(t_horizon)?;
    if f.is_empty() || f.levels().iter().all(|&l| l == 0.0) {
        return Ok(0.0);
    }
    let breaks = f.breakpoints();
    let levels = f.levels();
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let s_sqrt_inv = 1.0 / u;
        let mut total = 0.0;
        for (j, &level) in levels.iter().enumerate() {
            if level == 0.0 {
                continue;
            }
            let lo = breaks[j] * s_sqrt_inv;
            let hi = breaks[j + 1] * s_sqrt_inv;
            let mass = norm_cdf(hi) - norm_cdf(lo);
            let second = gauss_second_moment_cdf(hi) - gauss_second_moment_cdf(lo);
            total += level * level * (mass + second);
        }
        2.0 * u * total
    };
    let norm2 = adaptive_simpson(&integrand, 0.0, t_horizon.sqrt(), S_REL_TOL, 1e-300);
    Ok(norm2.max(0.0).sqrt())
}

/// `||g||` for an arbitrary function handle supported in `[support.0, support.1]`,
/// by nested quadrature on the defining double integral. `splits` lists interior
/// discontinuities of `g` so each smooth piece is integrated separately.
pub fn hnorm_fn<F>(
    g: &F,
    support: (f64, f64),
    splits: &[f64],
    t_horizon: f64,
    rel_tol: f64,
) -> Result<f64>
where
    F: Fn(f64) -> f64 + ?Sized,
{
    check_horizon(t_horizon)?;
    let (lo, hi) = support;
    if lo.is_nan() || hi.is_nan() || lo >= hi {
        return Err(Error::domain(format!("empty support [{lo}, {hi}]")));
    }
    let inner = |s: f64| {
        let weight = |x: f64| {
            let gx = g(x);
            if gx == 0.0 {
                return 0.0;
            }
            let phi = (-x * x / (2.0 * s)).exp() / (crate::math::SQRT_2PI * s.sqrt());
            gx * gx * phi * (1.0 + x * x / s)
        };
        // cut at the declared discontinuities and at sigma multiples around
        // the origin, so the density peak stays visible to the quadrature
        // as s -> 0
        let sigma = s.sqrt();
        let mut cuts = vec![lo, hi];
        for &c in splits {
            if c > lo && c < hi {
                cuts.push(c);
            }
        }
        for m in [-24.0, -12.0, -6.0, -3.0, -1.0, 1.0, 3.0, 6.0, 12.0, 24.0] {
            let c = m * sigma;
            if c > lo && c < hi {
                cuts.push(c);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        cuts.windows(2)
            .map(|w| adaptive_simpson(&weight, w[0], w[1], rel_tol * 0.25, 1e-300))
            .sum::<f64>()
    };
    let outer = |u: f64| {
        if u <= 0.0 {
            0.0
        } else {
            2.0 * u * inner(u * u)
        }
    };
    // fixed panels: the inner quadrature noise makes adaptive refinement of
    // the outer integral non-terminating
    let norm2 = composite_simpson(&outer, 0.0, t_horizon.sqrt(), 512);
    Ok(norm2.max(0.0).sqrt())
}

fn check_horizon(t_horizon: f64) -> Result<()> {
    if !t_horizon.is_finite() || t_horizon <= 0.0 {
        Err(Error::domain(format!("horizon T = {t_horizon} must be positive")))
    } else {
        Ok(())
    }
}
