//! Experiment dispatch: builds the grid and batch, runs the requested
//! estimator chain, and attaches targets and pass/fail verdicts where a
//! closed-form value exists.
//!
//! Residual tolerances follow one rule: a residual passes when its Monte
//! Carlo mean is within `max(5% of the natural scale, 3 standard errors)`
//! of the target.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::estimators::{
    self, mean_stderr, EstimateReport, EstimatorConfig, ItoMode,
};
use crate::function::{sign_shift, Integrand, ScalarFunction, StepFunction};
use crate::grid::TimeGrid;
use crate::harness::config::{Experiment, ExperimentConfig, FunctionSpec, ItoModeKey};
use crate::kernel::{hnorm, hnorm_fn, lemma_scan, BoundKind};
use crate::localtime::{
    bouleau_yor_residual, default_bandwidth, integral_wrt_localtime, local_time, mollify,
    occupation_check, tanaka_residual, LocalTimeField,
};
use crate::params::ModelParams;
use crate::sampler::{sample_paths, PathBatch};

/// One emitted metric row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub label: String,
    pub t: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n_paths: usize,
    pub epsilon: f64,
    pub target: Option<f64>,
    pub pass: Option<bool>,
}

/// Config echo plus metric rows; wall-clock is carried but only serialized
/// when the timestamp flag is on, keeping default output byte-deterministic.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub rows: Vec<RunRow>,
    pub wall_ms: u128,
    pub generated_at_unix: Option<u64>,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass != Some(false))
    }
}

fn params_for(cfg: &ExperimentConfig) -> Result<ModelParams> {
    if cfg.experiment.requires_critical() {
        ModelParams::new(cfg.h, cfg.k)
    } else {
        ModelParams::general(cfg.h, cfg.k)
    }
}

/// The scale used by residual verdicts: `max(5% of scale, 3 stderr)`.
fn residual_pass(mean: f64, stderr: f64, scale: f64) -> bool {
    mean.abs() <= (0.05 * scale.abs()).max(3.0 * stderr)
}

fn target_pass(mean: f64, stderr: f64, target: f64) -> bool {
    (mean - target).abs() <= (0.05 * target.abs()).max(3.0 * stderr)
}

fn rows_from_report(rep: &EstimateReport, target: impl Fn(f64) -> Option<f64>) -> Vec<RunRow> {
    rep.rows
        .iter()
        .map(|r| {
            let tgt = target(r.t);
            RunRow {
                label: rep.label.clone(),
                t: r.t,
                mean: r.mean,
                stderr: r.stderr,
                n_paths: rep.n_paths,
                epsilon: rep.epsilon,
                target: tgt,
                pass: tgt.map(|v| target_pass(r.mean, r.stderr, v)),
            }
        })
        .collect()
}

/// The built-in integrand catalog.
pub fn integrand(spec: &FunctionSpec) -> Integrand {
    match spec {
        FunctionSpec::One => ScalarFunction::c2("one", |_| 1.0, |_| 0.0, |_| 0.0)
            .expect("static")
            .into(),
        FunctionSpec::Identity => ScalarFunction::c2("identity", |x| x, |_| 1.0, |_| 0.0)
            .expect("static")
            .into(),
        FunctionSpec::Square => ScalarFunction::c2("square", |x| x * x, |x| 2.0 * x, |_| 2.0)
            .expect("static")
            .into(),
        FunctionSpec::AbsShift(a) => {
            let a = *a;
            ScalarFunction::lipschitz(format!("abs-shift({a})"), move |x| (x - a).abs()).into()
        }
        FunctionSpec::GaussianBump => ScalarFunction::c2(
            "gaussian-bump",
            |x| (-0.5 * x * x).exp(),
            |x| -x * (-0.5 * x * x).exp(),
            |x| (x * x - 1.0) * (-0.5 * x * x).exp(),
        )
        .expect("static")
        .into(),
        FunctionSpec::Step(f) => f.clone().into(),
    }
}

/// The `(F, f = F')` pair for Ito-formula experiments.
pub fn ito_pair(spec: &FunctionSpec) -> (ScalarFunction, Integrand) {
    match spec {
        FunctionSpec::One => (
            ScalarFunction::c2("one-antideriv", |x| x, |_| 1.0, |_| 0.0).expect("static"),
            integrand(&FunctionSpec::One),
        ),
        FunctionSpec::Identity => (
            ScalarFunction::c2("half-square", |x| 0.5 * x * x, |x| x, |_| 1.0).expect("static"),
            integrand(&FunctionSpec::Identity),
        ),
        FunctionSpec::Square => (
            ScalarFunction::c2("square", |x| x * x, |x| 2.0 * x, |_| 2.0).expect("static"),
            ScalarFunction::c2("2x", |x| 2.0 * x, |_| 2.0, |_| 0.0)
                .expect("static")
                .into(),
        ),
        FunctionSpec::AbsShift(a) => {
            let a = *a;
            (
                ScalarFunction::lipschitz(format!("abs-shift({a})"), move |x| (x - a).abs()),
                sign_shift(a).into(),
            )
        }
        FunctionSpec::GaussianBump => (
            // antiderivative of exp(-x^2/2) is sqrt(pi/2) erf(x/sqrt 2)
            ScalarFunction::c2(
                "bump-antideriv",
                |x| (std::f64::consts::PI / 2.0).sqrt() * libm::erf(x / std::f64::consts::SQRT_2),
                |x| (-0.5 * x * x).exp(),
                |x| -x * (-0.5 * x * x).exp(),
            )
            .expect("static"),
            integrand(&FunctionSpec::GaussianBump),
        ),
        FunctionSpec::Step(f) => {
            let fc = f.clone();
            (
                ScalarFunction::lipschitz("step-antideriv", move |x| fc.antiderivative(x)),
                f.clone().into(),
            )
        }
    }
}

fn build_batch(cfg: &ExperimentConfig, params: &ModelParams) -> Result<PathBatch> {
    // pad covers the largest epsilon any estimator will use
    let pad = if cfg.experiment == Experiment::Occupation {
        0
    } else {
        cfg.epsilon_multiple
    };
    let grid = TimeGrid::new(cfg.t_horizon, cfg.steps, pad)?;
    sample_paths(params, &grid, cfg.n_paths, cfg.seed)
}

fn estimator_config(cfg: &ExperimentConfig) -> Result<EstimatorConfig> {
    EstimatorConfig::new(cfg.epsilon_multiple, cfg.eval_times.clone())
}

fn space_grid(cfg: &ExperimentConfig) -> Vec<f64> {
    (0..cfg.space_points)
        .map(|i| {
            cfg.space_min
                + (cfg.space_max - cfg.space_min) * i as f64 / (cfg.space_points - 1) as f64
        })
        .collect()
}

fn build_field(cfg: &ExperimentConfig, batch: &PathBatch) -> Result<LocalTimeField> {
    let bw = cfg
        .bandwidth
        .unwrap_or_else(|| default_bandwidth(batch.grid()));
    local_time(batch, &space_grid(cfg), &cfg.eval_times, bw)
}

/// Runs one experiment to a deterministic report.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    let start = Instant::now();
    let params = params_for(cfg)?;
    let rows = match cfg.experiment {
        Experiment::Qv => {
            let batch = build_batch(cfg, &params)?;
            let rep = estimators::quadratic_variation(&batch, &estimator_config(cfg)?)?;
            let c = params.qv_constant();
            rows_from_report(&rep, |t| Some(c * t))
        }
        Experiment::Qc => {
            let batch = build_batch(cfg, &params)?;
            let ecfg = estimator_config(cfg)?;
            let f = integrand(&cfg.function);
            let mut rows = rows_from_report(
                &estimators::quadratic_covariation(&f, &batch, &ecfg)?,
                |_| None,
            );
            // a derivative handle unlocks the smooth-case reference and the
            // paired gap J_eps(f, t) - 2^{1-K} int f'(B) ds
            if let Integrand::Scalar(sf) = &f {
                if sf.has_derivative() {
                    let j = estimators::quadratic_covariation_paths(&f, &batch, &ecfg)?;
                    let r = estimators::smooth_reference_paths(sf, &batch, &cfg.eval_times)?;
                    rows.extend(rows_from_report(
                        &estimators::smooth_reference(sf, &batch, &cfg.eval_times)?,
                        |_| None,
                    ));
                    let gaps = &j - &r;
                    for (ti, &t) in cfg.eval_times.iter().enumerate() {
                        let col: Vec<f64> =
                            (0..batch.n_paths()).map(|p| gaps[[ti, p]]).collect();
                        let (mean, stderr) = mean_stderr(&col);
                        let scale = (0..batch.n_paths())
                            .map(|p| r[[ti, p]].abs())
                            .sum::<f64>()
                            / batch.n_paths() as f64;
                        rows.push(RunRow {
                            label: "qc_minus_smooth_ref".to_string(),
                            t,
                            mean,
                            stderr,
                            n_paths: batch.n_paths(),
                            epsilon: ecfg.epsilon(&batch),
                            target: Some(0.0),
                            pass: Some(residual_pass(mean, stderr, scale)),
                        });
                    }
                }
            }
            rows
        }
        Experiment::Forward => {
            let batch = build_batch(cfg, &params)?;
            let f = integrand(&cfg.function);
            rows_from_report(
                &estimators::forward_integral(&f, &batch, &estimator_config(cfg)?)?,
                |_| None,
            )
        }
        Experiment::Backward => {
            let batch = build_batch(cfg, &params)?;
            let f = integrand(&cfg.function);
            rows_from_report(
                &estimators::backward_integral(&f, &batch, &estimator_config(cfg)?)?,
                |_| None,
            )
        }
        Experiment::Skorohod => {
            let batch = build_batch(cfg, &params)?;
            let f = integrand(&cfg.function);
            rows_from_report(
                &estimators::skorohod_integral(&f, &batch, &estimator_config(cfg)?)?,
                |_| None,
            )
        }
        Experiment::Ito => {
            let batch = build_batch(cfg, &params)?;
            let ecfg = estimator_config(cfg)?;
            let (big_f, f) = ito_pair(&cfg.function);
            let mode = match cfg.ito_mode {
                ItoModeKey::Forward => ItoMode::Forward,
                ItoModeKey::Skorohod => ItoMode::Skorohod,
            };
            let rep = estimators::ito_residual(&big_f, &f, &batch, &ecfg, mode)?;
            let idx = ecfg.eval_indices(&batch)?;
            let f0 = big_f.eval(0.0);
            rep.rows
                .iter()
                .zip(&idx)
                .map(|(r, &j)| {
                    let scale = (0..batch.n_paths())
                        .map(|p| (big_f.eval(batch.value(p, j)) - f0).abs())
                        .sum::<f64>()
                        / batch.n_paths() as f64;
                    RunRow {
                        label: rep.label.clone(),
                        t: r.t,
                        mean: r.mean,
                        stderr: r.stderr,
                        n_paths: rep.n_paths,
                        epsilon: rep.epsilon,
                        target: Some(0.0),
                        pass: Some(residual_pass(r.mean, r.stderr, scale)),
                    }
                })
                .collect()
        }
        Experiment::Tanaka => {
            let batch = build_batch(cfg, &params)?;
            let ecfg = estimator_config(cfg)?;
            let field = build_field(cfg, &batch)?;
            let rep = tanaka_residual(&batch, &ecfg, &field, cfg.tanaka_level)?;
            let idx = ecfg.eval_indices(&batch)?;
            rep.rows
                .iter()
                .zip(&idx)
                .map(|(r, &j)| {
                    let scale = (0..batch.n_paths())
                        .map(|p| (batch.value(p, j) - cfg.tanaka_level).abs())
                        .sum::<f64>()
                        / batch.n_paths() as f64;
                    RunRow {
                        label: rep.label.clone(),
                        t: r.t,
                        mean: r.mean,
                        stderr: r.stderr,
                        n_paths: rep.n_paths,
                        epsilon: rep.epsilon,
                        target: Some(0.0),
                        pass: Some(residual_pass(r.mean, r.stderr, scale)),
                    }
                })
                .collect()
        }
        Experiment::BouleauYor => {
            let batch = build_batch(cfg, &params)?;
            let ecfg = estimator_config(cfg)?;
            let field = build_field(cfg, &batch)?;
            let step = match &cfg.function {
                FunctionSpec::Step(f) => f.clone(),
                other => {
                    return Err(Error::config(
                        "function",
                        format!("bouleau-yor needs a step function, got `{}`", other.name()),
                    ))
                }
            };
            let rep = bouleau_yor_residual(&step, &batch, &ecfg, &field)?;
            let j = estimators::quadratic_covariation_paths(
                &Integrand::Step(step.clone()),
                &batch,
                &ecfg,
            )?;
            let mut rows = Vec::new();
            for (ti, (row, &t)) in rep.rows.iter().zip(cfg.eval_times.iter()).enumerate() {
                let scale = (0..batch.n_paths())
                    .map(|p| j[[ti, p]].abs())
                    .sum::<f64>()
                    / batch.n_paths() as f64;
                rows.push(RunRow {
                    label: rep.label.clone(),
                    t,
                    mean: row.mean,
                    stderr: row.stderr,
                    n_paths: rep.n_paths,
                    epsilon: rep.epsilon,
                    target: Some(0.0),
                    pass: Some(residual_pass(row.mean, row.stderr, scale)),
                });
                // the Stieltjes-side normalization: -int f dL = 2^{K-1} J
                let stieltjes = integral_wrt_localtime(&step, &field, t)?;
                let half = (params.k() - 1.0).exp2();
                let resid: Vec<f64> = (0..batch.n_paths())
                    .map(|p| -stieltjes[p] - half * j[[ti, p]])
                    .collect();
                let (mean, stderr) = mean_stderr(&resid);
                let scale51 = stieltjes.iter().map(|v| v.abs()).sum::<f64>()
                    / batch.n_paths() as f64;
                rows.push(RunRow {
                    label: "stieltjes_halfk_residual".to_string(),
                    t,
                    mean,
                    stderr,
                    n_paths: batch.n_paths(),
                    epsilon: rep.epsilon,
                    target: Some(0.0),
                    pass: Some(residual_pass(mean, stderr, scale51.max(0.05))),
                });
            }
            rows
        }
        Experiment::Occupation => {
            let batch = build_batch(cfg, &params)?;
            let psi = match integrand(&cfg.function) {
                Integrand::Scalar(sf) => sf,
                Integrand::Step(f) => {
                    let fc = f.clone();
                    ScalarFunction::step_tag("step", move |x| fc.eval(x))
                }
            };
            let tol = if matches!(cfg.function, FunctionSpec::One) {
                0.02
            } else {
                0.05
            };
            let mut rows = Vec::new();
            for &t in &cfg.eval_times {
                let rep = occupation_check(&batch, &psi, t)?;
                let row = rep.rows[0];
                rows.push(RunRow {
                    label: rep.label.clone(),
                    t,
                    mean: row.mean,
                    stderr: row.stderr,
                    n_paths: rep.n_paths,
                    epsilon: 0.0,
                    target: Some(0.0),
                    pass: Some(row.mean <= tol),
                });
            }
            rows
        }
        Experiment::LemmaScan => {
            let report = lemma_scan(&params, cfg.scan_samples, cfg.seed)?;
            let mut rows = Vec::new();
            for check in &report.checks {
                match check.kind {
                    BoundKind::Explicit => rows.push(RunRow {
                        label: check.name.clone(),
                        t: report.t_horizon,
                        mean: check.violations as f64,
                        stderr: 0.0,
                        n_paths: check.samples,
                        epsilon: 0.0,
                        target: Some(0.0),
                        pass: Some(check.violations == 0),
                    }),
                    BoundKind::Empirical => {
                        for (suffix, value) in
                            [("_min", check.ratio_min), ("_sup", check.ratio_max)]
                        {
                            rows.push(RunRow {
                                label: format!("{}{suffix}", check.name),
                                t: report.t_horizon,
                                mean: value,
                                stderr: 0.0,
                                n_paths: check.samples,
                                epsilon: 0.0,
                                target: None,
                                pass: None,
                            });
                        }
                    }
                }
            }
            rows
        }
        Experiment::Hnorm => {
            let step = match &cfg.function {
                FunctionSpec::Step(f) => f.clone(),
                other => {
                    return Err(Error::config(
                        "function",
                        format!("hnorm needs a step function, got `{}`", other.name()),
                    ))
                }
            };
            let value = hnorm(&step, cfg.t_horizon)?;
            vec![RunRow {
                label: "hnorm".to_string(),
                t: cfg.t_horizon,
                mean: value,
                stderr: 0.0,
                n_paths: 0,
                epsilon: 0.0,
                target: None,
                pass: None,
            }]
        }
        Experiment::MollifyLadder => {
            let step = match &cfg.function {
                FunctionSpec::Step(f) => f.clone(),
                other => {
                    return Err(Error::config(
                        "function",
                        format!("mollify-ladder needs a step function, got `{}`", other.name()),
                    ))
                }
            };
            let batch = build_batch(cfg, &params)?;
            let ecfg = estimator_config(cfg)?;
            mollify_ladder_rows(cfg, &params, &batch, &ecfg, &step)?
        }
    };

    Ok(RunReport {
        config: cfg.clone(),
        rows,
        wall_ms: start.elapsed().as_millis(),
        generated_at_unix: if cfg.timestamp {
            Some(
                std::time::SystemTime::now()
                    .duration_since(std::time::UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0),
            )
        } else {
            None
        },
    })
}

fn mollify_ladder_rows(
    cfg: &ExperimentConfig,
    _params: &ModelParams,
    batch: &PathBatch,
    ecfg: &EstimatorConfig,
    step: &StepFunction,
) -> Result<Vec<RunRow>> {
    let t = *cfg.eval_times.last().unwrap();
    let eps = ecfg.epsilon(batch);
    let j_step = estimators::quadratic_covariation_paths(
        &Integrand::Step(step.clone()),
        batch,
        ecfg,
    )?;
    let t_idx = cfg.eval_times.len() - 1;
    let (lo, hi) = step.support().ok_or_else(|| {
        Error::config("levels", "mollify-ladder needs a non-empty step function")
    })?;

    let mut rows = Vec::new();
    let mut norms = Vec::new();
    let mut jgaps: Vec<(f64, f64)> = Vec::new();
    for &n in &cfg.mollify_orders {
        let smooth = mollify(step, n)?;
        let sc = smooth.clone();
        let stc = step.clone();
        let diff = move |x: f64| sc.eval(x) - stc.eval(x);
        // cut at the jumps and at the mollification band edges
        let mut splits: Vec<f64> = step.breakpoints().to_vec();
        splits.extend(step.breakpoints().iter().map(|a| a + 2.0 / n as f64));
        let norm = hnorm_fn(
            &diff,
            (lo - 0.5, hi + 2.0 / n as f64),
            &splits,
            cfg.t_horizon,
            1e-6,
        )?;
        norms.push(norm);
        rows.push(RunRow {
            label: format!("hnorm_diff[n={n}]"),
            t,
            mean: norm,
            stderr: 0.0,
            n_paths: 0,
            epsilon: 0.0,
            target: None,
            pass: None,
        });
        let j_n = estimators::quadratic_covariation_paths(
            &Integrand::Scalar(smooth),
            batch,
            ecfg,
        )?;
        let gaps: Vec<f64> = (0..batch.n_paths())
            .map(|p| (j_n[[t_idx, p]] - j_step[[t_idx, p]]).abs())
            .collect();
        let (mean, stderr) = mean_stderr(&gaps);
        jgaps.push((mean, stderr));
        rows.push(RunRow {
            label: format!("jgap_abs_mean[n={n}]"),
            t,
            mean,
            stderr,
            n_paths: batch.n_paths(),
            epsilon: eps,
            target: None,
            pass: None,
        });
    }
    // both ladders must decrease; the Monte Carlo one may invert once
    // within one standard error
    let hnorm_monotone = norms.windows(2).all(|w| w[1] <= w[0]);
    let mut inversions = 0;
    let mut hard_fail = false;
    for w in jgaps.windows(2) {
        let (m0, s0) = w[0];
        let (m1, s1) = w[1];
        if m1 > m0 {
            inversions += 1;
            if m1 - m0 > (s0 * s0 + s1 * s1).sqrt() {
                hard_fail = true;
            }
        }
    }
    let jgap_monotone = !hard_fail && inversions <= 1;
    let pass = hnorm_monotone && jgap_monotone;
    rows.push(RunRow {
        label: "ladder_monotone".to_string(),
        t,
        mean: if pass { 1.0 } else { 0.0 },
        stderr: 0.0,
        n_paths: batch.n_paths(),
        epsilon: eps,
        target: Some(1.0),
        pass: Some(pass),
    });
    Ok(rows)
}
