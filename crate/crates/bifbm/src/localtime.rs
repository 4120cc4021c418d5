//! Local time estimation and the calculus built on it.
//!
//! The window (boxcar) estimator realizes the occupation-density definition
//! `L(x, t) = lim (1/2h) lambda(s in [0, t]: |B_s - x| < h)` literally:
//!
//! ```text
//! L(x, t) = (delta / 2h) #{ i : t_i < t, |B(t_i) - x| < h }
//! ```
//!
//! Under `2HK = 1` the marginal variance is `s`, so
//! `E L(x, t) -> int_0^t phi_s(x) ds` as the resolution refines. On top of
//! the field sit the occupation-formula check, the Stieltjes integral
//! `int f(x) L(dx, t) = sum_j f_j [L(a_j, t) - L(a_{j-1}, t)]` for step
//! functions, the Bouleau-Yor residual `J_eps(f, t) + 2^{1-K} int f dL`, the
//! forward-form Tanaka residual, and the mollifier smoothing used to
//! transfer estimates from smooth to rough integrands.

use std::sync::{Arc, OnceLock};

use ndarray::Array2;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::{
    forward_integral_paths, quadratic_covariation_paths, EstimateReport, EstimatorConfig,
};
use crate::function::{sign_shift, Integrand, ScalarFunction, StepFunction};
use crate::grid::TimeGrid;
use crate::math::{adaptive_simpson, fmt_sig12};
use crate::sampler::PathBatch;

/// Per-path local time table on a space-time lattice.
#[derive(Debug, Clone)]
pub struct LocalTimeField {
    space_grid: Vec<f64>,
    eval_times: Vec<f64>,
    bandwidth: f64,
    /// per path: `n_x x n_t`
    tables: Vec<Array2<f64>>,
}

/// Default bandwidth `0.8 sqrt(delta)`.
///
/// The window estimator's bias at the starting level `x = 0` is dominated by
/// the unresolved density peak near `s = 0` and grows linearly in `h`; a
/// bandwidth on the per-step motion scale `sqrt(delta)` keeps that bias a
/// few tenths of a percent while the hit counts stay large enough for the
/// counting noise to sit below the intrinsic local-time variance.
pub fn default_bandwidth(grid: &TimeGrid) -> f64 {
    0.8 * grid.delta().sqrt()
}

/// Default space grid: 401 uniform nodes over `[-4 sqrt(T), 4 sqrt(T)]`
/// (the marginal variance is `t <= T`, so four standard deviations cover
/// the support; the spacing stays close to the default bandwidth).
pub fn default_space_grid(t_horizon: f64) -> Vec<f64> {
    let half = 4.0 * t_horizon.sqrt();
    let n = 401;
    (0..n)
        .map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64)
        .collect()
}

impl LocalTimeField {
    pub fn space_grid(&self) -> &[f64] {
        &self.space_grid
    }

    pub fn eval_times(&self) -> &[f64] {
        &self.eval_times
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn n_paths(&self) -> usize {
        self.tables.len()
    }

    pub fn time_index(&self, t: f64) -> Result<usize> {
        self.eval_times
            .iter()
            .position(|&u| (u - t).abs() <= 1e-9 * t.abs().max(1.0))
            .ok_or_else(|| Error::domain(format!("t = {t} is not among the field's eval times")))
    }

    pub fn value(&self, path: usize, x_index: usize, t_index: usize) -> f64 {
        self.tables[path][[x_index, t_index]]
    }

    /// Linear interpolation in `x`; zero outside the grid (the field has
    /// compact support once the grid covers the path range plus `h`).
    pub fn value_at(&self, path: usize, x: f64, t_index: usize) -> f64 {
        let g = &self.space_grid;
        let last = *g.last().unwrap();
        if x < g[0] || x > last {
            return 0.0;
        }
        if x == g[0] {
            return self.value(path, 0, t_index);
        }
        let hi = g.partition_point(|&v| v < x).min(g.len() - 1).max(1);
        let lo = hi - 1;
        let w = (x - g[lo]) / (g[hi] - g[lo]);
        (1.0 - w) * self.value(path, lo, t_index) + w * self.value(path, hi, t_index)
    }

    /// Trapezoidal mass `int L(x, t) dx`; the occupation formula with
    /// `psi = 1` makes this `t` up to resolution error.
    pub fn mass(&self, path: usize, t_index: usize) -> f64 {
        let g = &self.space_grid;
        let mut acc = 0.0;
        for w in 0..g.len() - 1 {
            acc += 0.5
                * (g[w + 1] - g[w])
                * (self.value(path, w, t_index) + self.value(path, w + 1, t_index));
        }
        acc
    }

    /// CSV dump `path_id,x,t,L` with 12 significant digits.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "path_id,x,t,L")?;
        for (p, table) in self.tables.iter().enumerate() {
            for (xi, &x) in self.space_grid.iter().enumerate() {
                for (ti, &t) in self.eval_times.iter().enumerate() {
                    writeln!(
                        w,
                        "{p},{},{},{}",
                        fmt_sig12(x),
                        fmt_sig12(t),
                        fmt_sig12(table[[xi, ti]])
                    )?;
                }
            }
        }
        Ok(())
    }
}

/// Window local-time estimator over the batch.
pub fn local_time(
    batch: &PathBatch,
    space_grid: &[f64],
    eval_times: &[f64],
    bandwidth: f64,
) -> Result<LocalTimeField> {
    if !bandwidth.is_finite() || bandwidth <= 0.0 {
        return Err(Error::domain(format!("bandwidth {bandwidth} must be positive")));
    }
    if space_grid.len() < 2 || space_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain(
            "space grid must be increasing with at least 2 nodes".to_string(),
        ));
    }
    if eval_times.is_empty() || eval_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("eval times must be non-empty and increasing".to_string()));
    }
    let grid = batch.grid();
    let mut time_idx = Vec::with_capacity(eval_times.len());
    for &t in eval_times {
        let j = grid.node_index(t)?;
        if j == 0 {
            return Err(Error::domain("eval times must be positive".to_string()));
        }
        time_idx.push(j);
    }
    let x0 = space_grid[0];
    // uniform grids admit O(1) window lookup; fall back to binary search
    let dx = space_grid[1] - x0;
    let uniform = space_grid
        .windows(2)
        .all(|w| ((w[1] - w[0]) - dx).abs() <= 1e-9 * dx);
    let n_x = space_grid.len();
    let weight = grid.delta() / (2.0 * bandwidth);
    let last = *time_idx.last().unwrap();

    let tables: Vec<Array2<f64>> = (0..batch.n_paths())
        .into_par_iter()
        .map(|p| {
            let mut counts = vec![0u32; n_x];
            let mut table = Array2::zeros((n_x, time_idx.len()));
            let mut next = 0;
            for i in 0..last {
                while next < time_idx.len() && time_idx[next] == i {
                    for (xi, &c) in counts.iter().enumerate() {
                        table[[xi, next]] = weight * f64::from(c);
                    }
                    next += 1;
                }
                let b = batch.value(p, i);
                let (lo, hi) = if uniform {
                    let lo = (((b - bandwidth - x0) / dx).floor() + 1.0).max(0.0) as usize;
                    let hi = (((b + bandwidth - x0) / dx).ceil() - 1.0).min(n_x as f64 - 1.0) as isize;
                    (lo, hi)
                } else {
                    let lo = space_grid.partition_point(|&x| x <= b - bandwidth);
                    let hi = space_grid.partition_point(|&x| x < b + bandwidth) as isize - 1;
                    (lo, hi)
                };
                if hi >= 0 {
                    for c in counts.iter_mut().take(hi as usize + 1).skip(lo) {
                        *c += 1;
                    }
                }
            }
            while next < time_idx.len() {
                for (xi, &c) in counts.iter().enumerate() {
                    table[[xi, next]] = weight * f64::from(c);
                }
                next += 1;
            }
            table
        })
        .collect();

    Ok(LocalTimeField {
        space_grid: space_grid.to_vec(),
        eval_times: eval_times.to_vec(),
        bandwidth,
        tables,
    })
}

/// Per-path relative gap between the two sides of the occupation formula
/// `int_0^t psi(B_s) ds = int psi(x) L(x, t) dx`.
pub fn occupation_gaps(
    batch: &PathBatch,
    field: &LocalTimeField,
    psi: &ScalarFunction,
    t: f64,
) -> Result<Vec<f64>> {
    let ti = field.time_index(t)?;
    let j = batch.grid().node_index(t)?;
    let delta = batch.grid().delta();
    let g = field.space_grid();
    let gaps = (0..batch.n_paths())
        .map(|p| {
            let time_side: f64 = (0..j).map(|i| psi.eval(batch.value(p, i))).sum::<f64>() * delta;
            let mut space_side = 0.0;
            for w in 0..g.len() - 1 {
                space_side += 0.5
                    * (g[w + 1] - g[w])
                    * (psi.eval(g[w]) * field.value(p, w, ti)
                        + psi.eval(g[w + 1]) * field.value(p, w + 1, ti));
            }
            let scale = time_side.abs().max(space_side.abs());
            if scale == 0.0 {
                0.0
            } else {
                (time_side - space_side).abs() / scale
            }
        })
        .collect();
    Ok(gaps)
}

/// Occupation-formula check with a field built at the default resolution.
pub fn occupation_check(batch: &PathBatch, psi: &ScalarFunction, t: f64) -> Result<EstimateReport> {
    let grid = batch.grid();
    let field = local_time(
        batch,
        &default_space_grid(grid.t_horizon()),
        &[t],
        default_bandwidth(grid),
    )?;
    let gaps = occupation_gaps(batch, &field, psi, t)?;
    let values = Array2::from_shape_vec((1, gaps.len()), gaps).expect("shape");
    Ok(EstimateReport::from_paths(
        format!("occupation[{}]", psi.label()),
        batch,
        0.0,
        &[t],
        &values,
    ))
}

/// The Stieltjes integral against local time in the space variable,
/// `int f(x) L(dx, t) = sum_j f_j [L(a_j, t) - L(a_{j-1}, t)]`, per path,
/// with `L` linearly interpolated between space-grid nodes.
pub fn integral_wrt_localtime(
    f: &StepFunction,
    field: &LocalTimeField,
    t: f64,
) -> Result<Vec<f64>> {
    let ti = field.time_index(t)?;
    let breaks = f.breakpoints();
    let levels = f.levels();
    Ok((0..field.n_paths())
        .map(|p| {
            levels
                .iter()
                .enumerate()
                .map(|(j, &level)| {
                    level
                        * (field.value_at(p, breaks[j + 1], ti) - field.value_at(p, breaks[j], ti))
                })
                .sum()
        })
        .collect())
}

/// Bouleau-Yor residual `J_eps(f, t) + 2^{1-K} int f(x) L(dx, t)`; the
/// identity `[f(B), B]_t = -2^{1-K} int f dL` drives it to zero.
pub fn bouleau_yor_residual(
    f: &StepFunction,
    batch: &PathBatch,
    cfg: &EstimatorConfig,
    field: &LocalTimeField,
) -> Result<EstimateReport> {
    let j = quadratic_covariation_paths(&Integrand::Step(f.clone()), batch, cfg)?;
    let constant = batch.params().qv_constant();
    let mut out = Array2::zeros(j.raw_dim());
    for (ti, &t) in cfg.eval_times().iter().enumerate() {
        let stieltjes = integral_wrt_localtime(f, field, t)?;
        for p in 0..batch.n_paths() {
            out[[ti, p]] = j[[ti, p]] + constant * stieltjes[p];
        }
    }
    Ok(EstimateReport::from_paths(
        "bouleau_yor",
        batch,
        cfg.epsilon(batch),
        cfg.eval_times(),
        &out,
    ))
}

/// Forward-form Tanaka residual at a space-grid level `x`:
/// `|B_t - x| - |x| - int sign(B - x) d^-B - 2^{1-K} L(x, t)`.
pub fn tanaka_residual(
    batch: &PathBatch,
    cfg: &EstimatorConfig,
    field: &LocalTimeField,
    x: f64,
) -> Result<EstimateReport> {
    let span = field.space_grid().last().unwrap() - field.space_grid()[0];
    let x_idx = field
        .space_grid()
        .iter()
        .position(|&g| (g - x).abs() <= 1e-9 * span.max(1.0))
        .ok_or_else(|| Error::domain(format!("level x = {x} is not a space-grid node")))?;
    let sign: Integrand = sign_shift(x).into();
    let fwd = forward_integral_paths(&sign, batch, cfg)?;
    let idx = cfg.eval_indices(batch)?;
    let constant = batch.params().qv_constant();
    let mut out = Array2::zeros(fwd.raw_dim());
    for (ti, (&t, &j)) in cfg.eval_times().iter().zip(&idx).enumerate() {
        let fti = field.time_index(t)?;
        for p in 0..batch.n_paths() {
            let bt = batch.value(p, j);
            out[[ti, p]] =
                (bt - x).abs() - x.abs() - fwd[[ti, p]] - constant * field.value(p, x_idx, fti);
        }
    }
    Ok(EstimateReport::from_paths(
        format!("tanaka[x={x}]"),
        batch,
        cfg.epsilon(batch),
        cfg.eval_times(),
        &out,
    ))
}

// ---------------------------------------------------------------------------
// Mollifiers
// ---------------------------------------------------------------------------

/// The bump `zeta(x) = c exp(1/((x-1)^2 - 1))` on `(0, 2)` and its
/// rescalings `zeta_n(x) = n zeta(n x)`, each of unit mass.
#[derive(Debug, Clone, Copy)]
pub struct MollifierFamily {
    order: usize,
}

fn zeta_unnormalized(x: f64) -> f64 {
    if x > 0.0 && x < 2.0 {
        (1.0 / ((x - 1.0) * (x - 1.0) - 1.0)).exp()
    } else {
        0.0
    }
}

/// `c = 1 / int_0^2 exp(1/((x-1)^2 - 1)) dx`, computed once by adaptive
/// quadrature.
pub fn normalizing_constant() -> f64 {
    static C: OnceLock<f64> = OnceLock::new();
    *C.get_or_init(|| 1.0 / adaptive_simpson(&zeta_unnormalized, 0.0, 2.0, 1e-12, 1e-300))
}

impl MollifierFamily {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::domain("mollifier order must be at least 1".to_string()));
        }
        Ok(Self { order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn zeta(x: f64) -> f64 {
        normalizing_constant() * zeta_unnormalized(x)
    }

    /// `zeta_n(x) = n zeta(n x)`, supported on `(0, 2/n)`.
    pub fn zeta_n(&self, x: f64) -> f64 {
        let n = self.order as f64;
        n * Self::zeta(n * x)
    }

    /// Quadrature of `zeta_n`; unit mass up to the quadrature tolerance.
    pub fn integral(&self) -> f64 {
        let n = self.order as f64;
        adaptive_simpson(&|x| self.zeta_n(x), 0.0, 2.0 / n, 1e-10, 1e-300)
    }
}

/// Cumulative distribution of `zeta` on dense Hermite nodes; `zeta` itself
/// is the node derivative, so cubic interpolation is essentially exact.
struct ZetaCdf {
    nodes: usize,
    step: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl ZetaCdf {
    fn build() -> Self {
        let nodes = 2049;
        let step = 2.0 / (nodes - 1) as f64;
        let mut values = Vec::with_capacity(nodes);
        let mut derivs = Vec::with_capacity(nodes);
        let mut acc = 0.0;
        values.push(0.0);
        derivs.push(0.0);
        for i in 1..nodes {
            let a = (i - 1) as f64 * step;
            let b = i as f64 * step;
            acc += adaptive_simpson(&MollifierFamily::zeta, a, b, 1e-11, 1e-300);
            values.push(acc);
            derivs.push(MollifierFamily::zeta(b));
        }
        ZetaCdf {
            nodes,
            step,
            values,
            derivs,
        }
    }

    fn shared() -> &'static ZetaCdf {
        static Z: OnceLock<ZetaCdf> = OnceLock::new();
        Z.get_or_init(ZetaCdf::build)
    }

    /// `Z(v) = int_0^v zeta(u) du`, clamped outside `(0, 2)`.
    fn eval(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 0.0;
        }
        if v >= 2.0 {
            return *self.values.last().unwrap();
        }
        let cell = ((v / self.step) as usize).min(self.nodes - 2);
        let x0 = cell as f64 * self.step;
        let s = (v - x0) / self.step;
        let (y0, y1) = (self.values[cell], self.values[cell + 1]);
        let (d0, d1) = (
            self.derivs[cell] * self.step,
            self.derivs[cell + 1] * self.step,
        );
        let s2 = s * s;
        let s3 = s2 * s;
        y0 * (2.0 * s3 - 3.0 * s2 + 1.0)
            + d0 * (s3 - 2.0 * s2 + s)
            + y1 * (-2.0 * s3 + 3.0 * s2)
            + d1 * (s3 - s2)
    }
}

/// Mollification `f_n(x) = int f(x - y) zeta_n(y) dy` of a step function.
///
/// For a step function the convolution is an exact finite combination of
/// the bump's distribution function, so both `f_n` and its derivative
/// evaluate in closed form:
///
/// ```text
/// f_n(x)  =   sum_j f_j [Z(n(x - a_{j-1})) - Z(n(x - a_j))]
/// f_n'(x) = n sum_j f_j [zeta(n(x - a_{j-1})) - zeta(n(x - a_j))]
/// ```
///
/// `f_n -> f` at continuity points and `sup |f_n| <= sup |f|`.
pub fn mollify(f: &StepFunction, order: usize) -> Result<ScalarFunction> {
    if order == 0 {
        return Err(Error::domain("mollifier order must be at least 1".to_string()));
    }
    let n = order as f64;
    let breaks: Arc<[f64]> = f.breakpoints().into();
    let levels: Arc<[f64]> = f.levels().into();
    let cdf = ZetaCdf::shared();
    let (b1, l1) = (Arc::clone(&breaks), Arc::clone(&levels));
    let eval = move |x: f64| {
        l1.iter()
            .enumerate()
            .map(|(j, &level)| level * (cdf.eval(n * (x - b1[j])) - cdf.eval(n * (x - b1[j + 1]))))
            .sum::<f64>()
    };
    let deriv = move |x: f64| {
        n * levels
            .iter()
            .enumerate()
            .map(|(j, &level)| {
                level
                    * (MollifierFamily::zeta(n * (x - breaks[j]))
                        - MollifierFamily::zeta(n * (x - breaks[j + 1])))
            })
            .sum::<f64>()
    };
    Ok(ScalarFunction::c_inf(
        format!("mollified[n={order}]"),
        eval,
        deriv,
    ))
}
