//! Finite-`epsilon` realizations of the limit definitions.
//!
//! With `epsilon = m * delta` quantized to the grid, the window functionals
//! are left-endpoint Riemann sums over `[0, t]` at mesh `delta`:
//!
//! ```text
//! J_eps(f, t)   = (1/eps) sum_i  {f(B_{t_i+eps}) - f(B_{t_i})} (B_{t_i+eps} - B_{t_i}) delta
//! forward(f,t)  = (1/eps) sum_i   f(B_{t_i})      (B_{t_i+eps} - B_{t_i}) delta
//! backward(f,t) = (1/eps) sum_i   f(B_{t_i+eps})  (B_{t_i+eps} - B_{t_i}) delta
//! ```
//!
//! so `backward - forward = J_eps` holds path by path to round-off. The
//! Skorohod integral is reproduced through the correction identity
//! `skorohod = forward - (1/2)(2^{K-1} - 1) J_eps(f, t)`, and the smooth-case
//! reference for `[f(B), B]_t` is `2^{1-K} int_0^t f'(B_s) ds`. Grid nodes
//! past `t` (the pad) supply `B_{s+eps}` for `s` near `t`; truncating instead
//! would bias `J_eps` by `O(eps)`.

use ndarray::Array2;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::function::{Integrand, ScalarFunction};
use crate::math::{fmt_sig12, round_sig12};
use crate::sampler::PathBatch;

/// Window width `epsilon = epsilon_steps * delta` and the evaluation times,
/// all of which must be grid nodes in `(0, T]` with `t + epsilon` inside the
/// padded grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorConfig {
    epsilon_steps: usize,
    eval_times: Vec<f64>,
}

impl EstimatorConfig {
    pub fn new(epsilon_steps: usize, eval_times: Vec<f64>) -> Result<Self> {
        if epsilon_steps == 0 {
            return Err(Error::domain("epsilon must be at least one grid step".to_string()));
        }
        if eval_times.is_empty() {
            return Err(Error::domain("at least one evaluation time is required".to_string()));
        }
        if eval_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("evaluation times must be strictly increasing".to_string()));
        }
        Ok(Self {
            epsilon_steps,
            eval_times,
        })
    }

    pub fn epsilon_steps(&self) -> usize {
        self.epsilon_steps
    }

    pub fn eval_times(&self) -> &[f64] {
        &self.eval_times
    }

    pub fn epsilon(&self, batch: &PathBatch) -> f64 {
        self.epsilon_steps as f64 * batch.grid().delta()
    }

    /// Node indices of the evaluation times, after checking every grid
    /// constraint against the batch.
    pub fn eval_indices(&self, batch: &PathBatch) -> Result<Vec<usize>> {
        let grid = batch.grid();
        let mut idx = Vec::with_capacity(self.eval_times.len());
        for &t in &self.eval_times {
            let j = grid.node_index(t)?;
            if j == 0 {
                return Err(Error::domain("evaluation times must be positive".to_string()));
            }
            if j > grid.steps() {
                return Err(Error::domain(format!(
                    "evaluation time {t} lies beyond the horizon T = {}",
                    grid.t_horizon()
                )));
            }
            if j + self.epsilon_steps > grid.steps() + grid.pad() {
                return Err(Error::domain(format!(
                    "t + epsilon exceeds the padded grid at t = {t}; increase the pad"
                )));
            }
            idx.push(j);
        }
        Ok(idx)
    }
}

/// Monte Carlo aggregate for one estimator: per-evaluation-time mean and
/// standard error plus the configuration echo.
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub label: String,
    pub h: f64,
    pub k: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub n_paths: usize,
    pub rows: Vec<EstimateRow>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct EstimateRow {
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
}

/// Sample mean and standard error (`sample std / sqrt(n)`).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl EstimateReport {
    /// Aggregate per-path values (`eval_times x paths`) in path-index order.
    pub fn from_paths(
        label: impl Into<String>,
        batch: &PathBatch,
        epsilon: f64,
        eval_times: &[f64],
        per_path: &Array2<f64>,
    ) -> Self {
        let rows = eval_times
            .iter()
            .zip(per_path.rows())
            .map(|(&t, row)| {
                let (mean, stderr) = mean_stderr(row.as_slice().expect("row-major"));
                EstimateRow { t, mean, stderr }
            })
            .collect();
        EstimateReport {
            label: label.into(),
            h: batch.params().h(),
            k: batch.params().k(),
            epsilon,
            seed: batch.seed(),
            n_paths: batch.n_paths(),
            rows,
        }
    }

    /// CSV rows `label,t,mean,stderr,n_paths,epsilon,H,K,seed`, floats with
    /// 12 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,t,mean,stderr,n_paths,epsilon,H,K,seed\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                self.label,
                fmt_sig12(row.t),
                fmt_sig12(row.mean),
                fmt_sig12(row.stderr),
                self.n_paths,
                fmt_sig12(self.epsilon),
                fmt_sig12(self.h),
                fmt_sig12(self.k),
                self.seed
            ));
        }
        out
    }

    /// JSON mirror of the CSV rows: identical fields, identical values.
    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                serde_json::json!({
                    "label": self.label,
                    "t": round_sig12(row.t),
                    "mean": round_sig12(row.mean),
                    "stderr": round_sig12(row.stderr),
                    "n_paths": self.n_paths,
                    "epsilon": round_sig12(self.epsilon),
                    "H": round_sig12(self.h),
                    "K": round_sig12(self.k),
                    "seed": self.seed,
                })
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}

/// Left-endpoint window accumulation: for each path, prefix sums of
/// `term(path, i, i + m)` scaled by `delta / epsilon`, snapshot at each
/// evaluation index.
fn accumulate<T>(batch: &PathBatch, cfg: &EstimatorConfig, term: T) -> Result<Array2<f64>>
where
    T: Fn(&[f64], usize, usize) -> f64 + Sync,
{
    let idx = cfg.eval_indices(batch)?;
    let m = cfg.epsilon_steps;
    let delta = batch.grid().delta();
    let scale = delta / cfg.epsilon(batch);
    let last = *idx.last().expect("validated non-empty");
    let n_paths = batch.n_paths();
    let cols: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let path = batch.path(p);
            let v = path.as_slice().expect("row-major");
            let mut snapshots = Vec::with_capacity(idx.len());
            let mut acc = 0.0;
            let mut next = 0;
            for i in 0..last {
                while next < idx.len() && idx[next] == i {
                    snapshots.push(acc * scale);
                    next += 1;
                }
                acc += term(v, i, i + m);
            }
            while next < idx.len() {
                snapshots.push(acc * scale);
                next += 1;
            }
            snapshots
        })
        .collect();
    let mut out = Array2::zeros((idx.len(), n_paths));
    for (p, col) in cols.into_iter().enumerate() {
        for (ti, v) in col.into_iter().enumerate() {
            out[[ti, p]] = v;
        }
    }
    Ok(out)
}

/// Realized quadratic variation `(1/eps) int_0^t (B_{s+eps} - B_s)^2 ds`;
/// the population target is `2^{1-K} t`.
pub fn quadratic_variation_paths(batch: &PathBatch, cfg: &EstimatorConfig) -> Result<Array2<f64>> {
    accumulate(batch, cfg, |v, i, ip| {
        let d = v[ip] - v[i];
        d * d
    })
}

pub fn quadratic_variation(batch: &PathBatch, cfg: &EstimatorConfig) -> Result<EstimateReport> {
    let values = quadratic_variation_paths(batch, cfg)?;
    Ok(EstimateReport::from_paths(
        "qv",
        batch,
        cfg.epsilon(batch),
        cfg.eval_times(),
        &values,
    ))
}

/// `J_eps(f, t)`, the finite-window quadratic covariation `[f(B), B]_t`.
pub fn quadratic_covariation_paths(
    f: &Integrand,
    batch: &PathBatch,
    cfg: &EstimatorConfig,
) -> Result<Array2<f64>> {
    accumulate(batch, cfg, |v, i, ip| {
        (f.eval(v[ip]) - f.eval(v[i])) * (v[ip] - v[i])
    })
}

pub fn quadratic_covariation(
    f: &Integrand,
    batch: &PathBatch,
    cfg: &EstimatorConfig,
) -> Result<EstimateReport> {
    let values = quadratic_covariation_paths(f, batch, cfg)?;
    Ok(EstimateReport::from_paths(
        format!("qc[{}]", f.label()),
        batch,
        cfg.epsilon(batch),
        cfg.eval_times(),
        &values,
    ))
}

/// Forward window integral `(1/eps) int_0^t f(B_s)(B_{s+eps} - B_s) ds`.
pub fn forward_integral_paths(
    f: &Integrand,
    batch: &PathBatch,
    cfg: &EstimatorConfig,
) -> Result<Array2<f64>> {
    accumulate(batch, cfg, |v, i, ip| f.eval(v[i]) * (v[ip] - v[i]))
}

pub fn forward_integral(
    f: &Integrand,
    batch: &PathBatch,
    cfg: &EstimatorConfig,
) -> Result<EstimateReport> {
    let values = forward_integral_paths(f, batch, cfg)?;
    Ok(EstimateReport::from_paths(
        format!("forward[{}]", f.label()),
        batch,
        cfg.epsilon(batch),
        cfg.eval_times(),
        &values,
    ))
}

/// Backward window integral `(1/eps) int_0^t f(B_{s+eps})(B_{s+eps} - B_s) ds`.
pub fn backward_integral_paths(
    f: &Integrand,
    batch: &PathBatch,
    cfg: &EstimatorConfig,
) -> Result<Array2<f64>> {
    accumulate(batch, cfg, |v, i, ip| f.eval(v[ip]) * (v[ip] - v[i]))
}

pub fn backward_integral(
    f: &Integrand,
    batch: &PathBatch,
    cfg: &EstimatorConfig,
) -> Result<EstimateReport> {
    let values = backward_integral_paths(f, batch, cfg)?;
    Ok(EstimateReport::from_paths(
        format!("backward[{}]", f.label()),
        batch,
        cfg.epsilon(batch),
        cfg.eval_times(),
        &values,
    ))
}

/// Skorohod integral through the forward-integral correction:
/// `forward - (1/2)(2^{K-1} - 1) J_eps(f, t)`. At `K = 1` the coefficient is
/// exactly zero and the forward values are returned unchanged.
pub fn skorohod_integral_paths(
    f: &Integrand,
    batch: &PathBatch,
    cfg: &EstimatorConfig,
) -> Result<Array2<f64>> {
    let coeff = 0.5 * batch.params().skorohod_coefficient();
    let forward = forward_integral_paths(f, batch, cfg)?;
    if coeff == 0.0 {
        return Ok(forward);
    }
    let cov = quadratic_covariation_paths(f, batch, cfg)?;
    Ok(&forward - &(&cov * coeff))
}

pub fn skorohod_integral(
    f: &Integrand,
    batch: &PathBatch,
    cfg: &EstimatorConfig,
) -> Result<EstimateReport> {
    let values = skorohod_integral_paths(f, batch, cfg)?;
    Ok(EstimateReport::from_paths(
        format!("skorohod[{}]", f.label()),
        batch,
        cfg.epsilon(batch),
        cfg.eval_times(),
        &values,
    ))
}

/// Smooth-case value of the quadratic covariation,
/// `2^{1-K} int_0^t f'(B_s) ds` at mesh `delta`.
pub fn smooth_reference_paths(
    f: &ScalarFunction,
    batch: &PathBatch,
    eval_times: &[f64],
) -> Result<Array2<f64>> {
    if !f.has_derivative() {
        return Err(Error::domain(format!(
            "smooth reference needs a derivative handle on `{}`",
            f.label()
        )));
    }
    if eval_times.is_empty() || eval_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::domain("evaluation times must be non-empty and increasing".to_string()));
    }
    let grid = batch.grid();
    let mut idx = Vec::with_capacity(eval_times.len());
    for &t in eval_times {
        let j = grid.node_index(t)?;
        if j == 0 || j > grid.steps() {
            return Err(Error::domain(format!("evaluation time {t} outside (0, T]")));
        }
        idx.push(j);
    }
    let constant = batch.params().qv_constant();
    let delta = grid.delta();
    let last = *idx.last().unwrap();
    let n_paths = batch.n_paths();
    let cols: Vec<Vec<f64>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let path = batch.path(p);
            let v = path.as_slice().expect("row-major");
            let mut snapshots = Vec::with_capacity(idx.len());
            let mut acc = 0.0;
            let mut next = 0;
            for (i, vi) in v.iter().enumerate().take(last) {
                while next < idx.len() && idx[next] == i {
                    snapshots.push(constant * acc * delta);
                    next += 1;
                }
                acc += f.derivative(*vi).expect("derivative checked above");
            }
            while next < idx.len() {
                snapshots.push(constant * acc * delta);
                next += 1;
            }
            snapshots
        })
        .collect();
    let mut out = Array2::zeros((idx.len(), n_paths));
    for (p, col) in cols.into_iter().enumerate() {
        for (ti, v) in col.into_iter().enumerate() {
            out[[ti, p]] = v;
        }
    }
    Ok(out)
}

pub fn smooth_reference(
    f: &ScalarFunction,
    batch: &PathBatch,
    eval_times: &[f64],
) -> Result<EstimateReport> {
    let values = smooth_reference_paths(f, batch, eval_times)?;
    Ok(EstimateReport::from_paths(
        format!("smooth_ref[{}]", f.label()),
        batch,
        0.0,
        eval_times,
        &values,
    ))
}

/// Which Ito formula the residual is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ItoMode {
    /// `F(B_t) = F(0) + int f(B) d^-B + (1/2) [f(B), B]_t`
    Forward,
    /// `F(B_t) = F(0) + int f(B) dB + 2^{K-2} [f(B), B]_t`
    Skorohod,
}

/// Pathwise Ito-formula residual
/// `F(B_t) - F(0) - (integral term) - (correction term)`.
///
/// The caller asserts `F' = f`. The two modes differ by exactly the
/// forward-to-Skorohod correction, so their residuals agree path by path to
/// round-off.
pub fn ito_residual_paths(
    big_f: &ScalarFunction,
    f: &Integrand,
    batch: &PathBatch,
    cfg: &EstimatorConfig,
    mode: ItoMode,
) -> Result<Array2<f64>> {
    let idx = cfg.eval_indices(batch)?;
    let forward = forward_integral_paths(f, batch, cfg)?;
    let cov = quadratic_covariation_paths(f, batch, cfg)?;
    let cov_coeff = match mode {
        ItoMode::Forward => 0.5,
        // integral term forward - (1/2) kappa J, correction 2^{K-2} J
        ItoMode::Skorohod => {
            batch.params().ito_coefficient() - 0.5 * batch.params().skorohod_coefficient()
        }
    };
    let f0 = big_f.eval(0.0);
    let mut out = Array2::zeros(forward.raw_dim());
    for (ti, &j) in idx.iter().enumerate() {
        for p in 0..batch.n_paths() {
            let ft = big_f.eval(batch.value(p, j));
            out[[ti, p]] = ft - f0 - forward[[ti, p]] - cov_coeff * cov[[ti, p]];
        }
    }
    Ok(out)
}

pub fn ito_residual(
    big_f: &ScalarFunction,
    f: &Integrand,
    batch: &PathBatch,
    cfg: &EstimatorConfig,
    mode: ItoMode,
) -> Result<EstimateReport> {
    let values = ito_residual_paths(big_f, f, batch, cfg, mode)?;
    let tag = match mode {
        ItoMode::Forward => "forward",
        ItoMode::Skorohod => "skorohod",
    };
    Ok(EstimateReport::from_paths(
        format!("ito_{tag}[{}]", big_f.label()),
        batch,
        cfg.epsilon(batch),
        cfg.eval_times(),
        &values,
    ))
}
