//! Shared numerical helpers: Gaussian special functions and adaptive
//! Simpson quadrature.

pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;

/// Standard normal density.
pub fn gauss_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / SQRT_2PI
}

/// Standard normal distribution function, accurate in both tails.
pub fn norm_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Second truncated moment of the standard normal,
/// `G(z) = int_{-inf}^z u^2 phi(u) du = Phi(z) - z phi(z)`.
pub fn gauss_second_moment_cdf(z: f64) -> f64 {
    if z.is_infinite() {
        return if z > 0.0 { 1.0 } else { 0.0 };
    }
    norm_cdf(z) - z * gauss_pdf(z)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
///
/// The interval is first cut into 32 panels (so a feature wider than one
/// panel cannot hide between sample points), each refined recursively until
/// the local Richardson estimate is below the budgeted tolerance derived
/// from `rel_tol` times a coarse estimate of the integral magnitude (with
/// `abs_floor` as an absolute floor for integrals near zero). A node budget
/// bounds the total work on integrands the Richardson test cannot settle
/// (for instance when `f` itself carries quadrature noise).
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, rel_tol: f64, abs_floor: f64) -> f64
where
    F: Fn(f64) -> f64 + ?Sized,
{
    if a == b {
        return 0.0;
    }
    let panels = 32;
    let h = (b - a) / panels as f64;
    let mut coarse = Vec::with_capacity(panels);
    let mut scale = 0.0f64;
    for i in 0..panels {
        let x0 = a + i as f64 * h;
        let x1 = x0 + h;
        let fa = f(x0);
        let fb = f(x1);
        let (s, fm, m) = simpson_with(f, x0, fa, x1, fb);
        scale += s.abs();
        coarse.push((x0, fa, m, fm, x1, fb, s));
    }
    let eps = (rel_tol * scale).max(abs_floor) / panels as f64;

    let mut budget: u32 = 200_000;
    coarse
        .into_iter()
        .map(|(x0, fa, m, fm, x1, fb, s)| {
            adaptive_step(f, x0, fa, m, fm, x1, fb, s, eps, 40, &mut budget)
        })
        .sum()
}

fn simpson_with<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    fa: f64,
    b: f64,
    fb: f64,
) -> (f64, f64, f64) {
    let m = 0.5 * (a + b);
    let fm = f(m);
    ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fm, m)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_step<F: Fn(f64) -> f64 + ?Sized>(
    f: &F,
    a: f64,
    fa: f64,
    m: f64,
    fm: f64,
    b: f64,
    fb: f64,
    whole: f64,
    eps: f64,
    depth: u32,
    budget: &mut u32,
) -> f64 {
    let (left, flm, lm) = simpson_with(f, a, fa, m, fm);
    let (right, frm, rm) = simpson_with(f, m, fm, b, fb);
    let delta = left + right - whole;
    *budget = budget.saturating_sub(1);
    if depth == 0 || *budget == 0 || delta.abs() <= 15.0 * eps {
        left + right + delta / 15.0
    } else {
        adaptive_step(f, a, fa, lm, flm, m, fm, left, 0.5 * eps, depth - 1, budget)
            + adaptive_step(f, m, fm, rm, frm, b, fb, right, 0.5 * eps, depth - 1, budget)
    }
}

/// Composite Simpson with `panels` fixed panels; the workhorse for outer
/// integrals whose integrand carries inner-quadrature noise that adaptive
/// refinement would chase forever.
pub fn composite_simpson<F>(f: &F, a: f64, b: f64, panels: usize) -> f64
where
    F: Fn(f64) -> f64 + ?Sized,
{
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    let mut f_left = f(a);
    for i in 0..panels {
        let x0 = a + i as f64 * h;
        let x1 = x0 + h;
        let fm = f(0.5 * (x0 + x1));
        let f_right = f(x1);
        acc += h / 6.0 * (f_left + 4.0 * fm + f_right);
        f_left = f_right;
    }
    acc
}

/// Round to 12 significant digits through the decimal representation, so a
/// value and its printed form agree exactly.
pub fn round_sig12(x: f64) -> f64 {
    if !x.is_finite() {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Format with 12 significant digits, matching [`round_sig12`].
pub fn fmt_sig12(x: f64) -> String {
    format!("{x:.11e}")
}
