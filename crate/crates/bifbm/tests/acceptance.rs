//! Acceptance suite: the toolkit's exit criteria, one test per criterion,
//! each printing a single PASS/FAIL line (run with `--nocapture` to see
//! them). Tolerances are pinned here, not calibrated elsewhere:
//!
//! 1. quadratic-variation constant `2^{1-K} t` at the desk-scale profile;
//! 2. Brownian oracle (covariance, QV, Tanaka at the origin);
//! 3. deterministic inequality scans at three critical parameter pairs;
//! 4. smooth-case covariation identity for `f(x) = x^2`;
//! 5. Ito-formula residual for `F = x^2` plus the resolution ladder;
//! 6. Bouleau-Yor identity on an indicator, both normalizations;
//! 7. expected local time at the origin for two parameter pairs;
//! 8. occupation formula for constant and Gaussian-bump weights;
//! 9. exact discrete identities and byte-for-byte determinism;
//! 10. mollifier ladder: norm and estimator convergence transfer.

use std::time::Instant;

use bifbm::estimators::{
    backward_integral_paths, forward_integral_paths, ito_residual_paths, mean_stderr,
    quadratic_covariation_paths, quadratic_variation, quadratic_variation_paths,
    skorohod_integral_paths, smooth_reference_paths, EstimatorConfig, ItoMode,
};
use bifbm::function::{Integrand, ScalarFunction, StepFunction};
use bifbm::harness::{emit_report, parse_config, run_experiment, OutputFormat};
use bifbm::kernel::{covariance, elementary_inequality_check, hnorm_fn, lemma_scan};
use bifbm::localtime::{
    bouleau_yor_residual, default_bandwidth, default_space_grid, integral_wrt_localtime,
    local_time, mollify, occupation_gaps, tanaka_residual,
};
use bifbm::sampler::sample_paths;
use bifbm::{ModelParams, PathBatch, TimeGrid};

const QV_TARGET: f64 = 1.259_921_049_894_873_2; // 2^{1/3}
const ROOT_2_OVER_PI: f64 = 0.797_884_560_802_865_4;
const SEED: u64 = 909;

fn crit() -> ModelParams {
    ModelParams::new(0.75, 2.0 / 3.0).unwrap()
}

fn desk_batch(params: ModelParams, seed: u64) -> PathBatch {
    let grid = TimeGrid::new(1.0, 2048, 16).unwrap();
    sample_paths(&params, &grid, 500, seed).unwrap()
}

fn desk_cfg() -> EstimatorConfig {
    EstimatorConfig::new(16, vec![1.0]).unwrap()
}

fn square_pair() -> (ScalarFunction, Integrand) {
    (
        ScalarFunction::c2("square", |x| x * x, |x| 2.0 * x, |_| 2.0).unwrap(),
        ScalarFunction::c2("2x", |x| 2.0 * x, |_| 2.0, |_| 0.0)
            .unwrap()
            .into(),
    )
}

fn verdict(criterion: &str, ok: bool, detail: &str, started: Instant) {
    println!(
        "criterion {criterion}: {} - {detail} ({:.1}s)",
        if ok { "PASS" } else { "FAIL" },
        started.elapsed().as_secs_f64()
    );
    assert!(ok, "criterion {criterion} failed: {detail}");
}

#[test]
fn criterion_1_quadratic_variation_constant() {
    let started = Instant::now();
    let batch = desk_batch(crit(), SEED);
    let rep = quadratic_variation(&batch, &desk_cfg()).unwrap();
    let row = rep.rows[0];
    let within_rel = (row.mean - QV_TARGET).abs() <= 0.05 * QV_TARGET;
    let within_se = (row.mean - QV_TARGET).abs() <= 3.0 * row.stderr;
    let in_time = started.elapsed().as_secs() < 300;
    verdict(
        "1 (qv constant)",
        within_rel && within_se && in_time,
        &format!(
            "mean {:.5} vs 2^(1/3) = {QV_TARGET:.5}, stderr {:.5}",
            row.mean, row.stderr
        ),
        started,
    );
}

#[test]
fn criterion_2_brownian_oracle() {
    let started = Instant::now();
    let bm = ModelParams::brownian();

    // covariance reduces to min(s, t) at double precision
    let mut cov_ok = true;
    for (s, t) in [(0.25, 1.0), (0.5, 0.5), (2.0, 0.125), (1.0, 3.0), (0.0, 1.0)] {
        cov_ok &= (covariance(&bm, s, t).unwrap() - s.min(t)).abs() <= 1e-12;
    }

    let batch = desk_batch(bm, SEED);
    let cfg = desk_cfg();
    let rep = quadratic_variation(&batch, &cfg).unwrap();
    let row = rep.rows[0];
    let qv_ok =
        (row.mean - 1.0).abs() <= 0.05 && (row.mean - 1.0).abs() <= 3.0 * row.stderr;

    let field = local_time(
        &batch,
        &default_space_grid(1.0),
        &[1.0],
        default_bandwidth(batch.grid()),
    )
    .unwrap();
    let tan = tanaka_residual(&batch, &cfg, &field, 0.0).unwrap();
    let tan_ok = tan.rows[0].mean.abs() <= 0.05 * ROOT_2_OVER_PI;

    verdict(
        "2 (Brownian oracle)",
        cov_ok && qv_ok && tan_ok,
        &format!(
            "covariance = min {cov_ok}; qv mean {:.5}; tanaka residual {:.5} vs band {:.5}",
            row.mean,
            tan.rows[0].mean,
            0.05 * ROOT_2_OVER_PI
        ),
        started,
    );
}

#[test]
fn criterion_3_inequality_scans() {
    let started = Instant::now();
    let mut violations = 0usize;
    for (h, k) in [(0.5, 1.0), (0.75, 2.0 / 3.0), (0.625, 0.8)] {
        let params = ModelParams::new(h, k).unwrap();
        let report = lemma_scan(&params, 10_000, SEED).unwrap();
        violations += report.total_violations();
    }
    let elementary = elementary_inequality_check(0.5, 2.0, 100_000).unwrap()
        && elementary_inequality_check(1.0, 1.0, 101).unwrap()
        && elementary_inequality_check(0.0, 1.0, 101).unwrap();
    let in_time = started.elapsed().as_secs() < 60;
    verdict(
        "3 (inequality scans)",
        violations == 0 && elementary && in_time,
        &format!("violations {violations} over 3 parameter pairs; elementary inequalities {elementary}"),
        started,
    );
}

#[test]
fn criterion_4_smooth_covariation_identity() {
    let started = Instant::now();
    let batch = desk_batch(crit(), SEED);
    let cfg = desk_cfg();
    let (sq, _) = square_pair();
    let j = quadratic_covariation_paths(&sq.clone().into(), &batch, &cfg).unwrap();
    let r = smooth_reference_paths(&sq, &batch, &[1.0]).unwrap();
    let diffs: Vec<f64> = (0..batch.n_paths())
        .map(|p| j[[0, p]] - r[[0, p]])
        .collect();
    let (mean, stderr) = mean_stderr(&diffs);
    let scale =
        (0..batch.n_paths()).map(|p| r[[0, p]].abs()).sum::<f64>() / batch.n_paths() as f64;
    let band = (0.05 * scale).max(3.0 * stderr);
    verdict(
        "4 (smooth covariation)",
        mean.abs() <= band,
        &format!("paired gap mean {mean:.5} vs band {band:.5} (scale {scale:.4})"),
        started,
    );
}

#[test]
fn criterion_5_ito_formula_and_ladder() {
    let started = Instant::now();
    let (big_f, f) = square_pair();

    // residual at the default profile
    let batch = desk_batch(crit(), SEED);
    let res = ito_residual_paths(&big_f, &f, &batch, &desk_cfg(), ItoMode::Forward).unwrap();
    let col: Vec<f64> = (0..batch.n_paths()).map(|p| res[[0, p]]).collect();
    let (mean, _) = mean_stderr(&col);
    let residual_ok = mean.abs() <= 0.05; // E[B_1^2] = 1

    // resolution ladder 512/8 -> 1024/8 -> 2048/16 on mean |residual|
    let mut levels = Vec::new();
    for (n, m) in [(512usize, 8usize), (1024, 8), (2048, 16)] {
        let grid = TimeGrid::new(1.0, n, m).unwrap();
        let b = sample_paths(&crit(), &grid, 500, 101).unwrap();
        let cfg = EstimatorConfig::new(m, vec![1.0]).unwrap();
        let r = ito_residual_paths(&big_f, &f, &b, &cfg, ItoMode::Forward).unwrap();
        let abs: Vec<f64> = (0..b.n_paths()).map(|p| r[[0, p]].abs()).collect();
        levels.push(mean_stderr(&abs));
    }
    let mut inversions = 0;
    let mut hard_fail = false;
    for w in levels.windows(2) {
        let ((m0, s0), (m1, s1)) = (w[0], w[1]);
        if m1 > m0 {
            inversions += 1;
            if m1 - m0 > (s0 * s0 + s1 * s1).sqrt() {
                hard_fail = true;
            }
        }
    }
    let ladder_ok = !hard_fail && inversions <= 1;
    verdict(
        "5 (Ito formula)",
        residual_ok && ladder_ok,
        &format!(
            "residual mean {mean:.5} (band 0.05); ladder {:?}, inversions {inversions}",
            levels.iter().map(|l| l.0).collect::<Vec<_>>()
        ),
        started,
    );
}

#[test]
fn criterion_6_bouleau_yor_identity() {
    let started = Instant::now();
    let params = crit();
    let batch = desk_batch(params, SEED);
    let cfg = desk_cfg();
    let field = local_time(
        &batch,
        &default_space_grid(1.0),
        &[1.0],
        default_bandwidth(batch.grid()),
    )
    .unwrap();
    let f = StepFunction::indicator(-1.0, 1.0).unwrap();

    let rep = bouleau_yor_residual(&f, &batch, &cfg, &field).unwrap();
    let j = quadratic_covariation_paths(&Integrand::Step(f.clone()), &batch, &cfg).unwrap();
    let j_scale =
        (0..batch.n_paths()).map(|p| j[[0, p]].abs()).sum::<f64>() / batch.n_paths() as f64;
    let row = rep.rows[0];
    let by_ok = row.mean.abs() <= (0.05 * j_scale).max(3.0 * row.stderr);

    // cross-check the inverse normalization on the same data:
    // L(a, t) - L(b, t) = 2^{K-1} [1_(a,b](B), B]_t
    let stieltjes = integral_wrt_localtime(&f, &field, 1.0).unwrap();
    let half = (params.k() - 1.0).exp2();
    let resid: Vec<f64> = (0..batch.n_paths())
        .map(|p| -stieltjes[p] - half * j[[0, p]])
        .collect();
    let (mean51, stderr51) = mean_stderr(&resid);
    let s_scale = stieltjes.iter().map(|v| v.abs()).sum::<f64>() / stieltjes.len() as f64;
    let l51_ok = mean51.abs() <= (0.05 * s_scale).max(3.0 * stderr51);

    verdict(
        "6 (Bouleau-Yor)",
        by_ok && l51_ok,
        &format!(
            "2^(1-K) form mean {:.5} (J scale {:.4}); 2^(K-1) form mean {:.5} (scale {:.4})",
            row.mean, j_scale, mean51, s_scale
        ),
        started,
    );
}

#[test]
fn criterion_7_local_time_expectation() {
    let started = Instant::now();
    let mut ok = true;
    let mut detail = String::new();
    for (params, label) in [(crit(), "(3/4,2/3)"), (ModelParams::brownian(), "(1/2,1)")] {
        let batch = desk_batch(params, SEED);
        let field = local_time(
            &batch,
            &default_space_grid(1.0),
            &[1.0],
            default_bandwidth(batch.grid()),
        )
        .unwrap();
        let zero = field
            .space_grid()
            .iter()
            .position(|&x| x.abs() < 1e-12)
            .unwrap();
        let mean: f64 = (0..batch.n_paths())
            .map(|p| field.value(p, zero, 0))
            .sum::<f64>()
            / batch.n_paths() as f64;
        ok &= (mean - ROOT_2_OVER_PI).abs() <= 0.05 * ROOT_2_OVER_PI;
        detail.push_str(&format!("{label}: {mean:.5} "));
    }
    verdict(
        "7 (local time at 0)",
        ok,
        &format!("{detail}vs sqrt(2/pi) = {ROOT_2_OVER_PI:.5} within 5%"),
        started,
    );
}

#[test]
fn criterion_8_occupation_formula() {
    let started = Instant::now();
    let batch = desk_batch(crit(), SEED);
    let field = local_time(
        &batch,
        &default_space_grid(1.0),
        &[1.0],
        default_bandwidth(batch.grid()),
    )
    .unwrap();
    let one = ScalarFunction::lipschitz("one", |_| 1.0);
    let gaps = occupation_gaps(&batch, &field, &one, 1.0).unwrap();
    let mean_one = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let bump = ScalarFunction::lipschitz("bump", |x| (-0.5 * x * x).exp());
    let gaps = occupation_gaps(&batch, &field, &bump, 1.0).unwrap();
    let mean_bump = gaps.iter().sum::<f64>() / gaps.len() as f64;
    verdict(
        "8 (occupation formula)",
        mean_one <= 0.02 && mean_bump <= 0.05,
        &format!("psi=1 gap {mean_one:.5} (band 0.02); bump gap {mean_bump:.5} (band 0.05)"),
        started,
    );
}

#[test]
fn criterion_9_exact_identities_and_determinism() {
    let started = Instant::now();
    let grid = TimeGrid::new(1.0, 256, 16).unwrap();
    let batch = sample_paths(&crit(), &grid, 32, SEED).unwrap();
    let cfg = EstimatorConfig::new(16, vec![0.5, 1.0]).unwrap();

    // backward - forward = J_eps per path, for smooth and step integrands
    let mut exact_ok = true;
    for f in [
        Integrand::from(ScalarFunction::c2("identity", |x| x, |_| 1.0, |_| 0.0).unwrap()),
        StepFunction::indicator(-0.5, 0.5).unwrap().into(),
    ] {
        let fwd = forward_integral_paths(&f, &batch, &cfg).unwrap();
        let bwd = backward_integral_paths(&f, &batch, &cfg).unwrap();
        let j = quadratic_covariation_paths(&f, &batch, &cfg).unwrap();
        for (d, jj) in (&bwd - &fwd).iter().zip(j.iter()) {
            exact_ok &= (d - jj).abs() <= 1e-10 * jj.abs().max(1.0);
        }
    }

    // linearity of J_eps
    let f1 = StepFunction::indicator(-0.4, 0.2).unwrap();
    let f2 = StepFunction::new(vec![-1.0, 0.1, 0.9], vec![1.0, -2.0]).unwrap();
    let combo = f1.scale(1.5).add(&f2.scale(-0.5));
    let ja = quadratic_covariation_paths(&f1.into(), &batch, &cfg).unwrap();
    let jb = quadratic_covariation_paths(&f2.into(), &batch, &cfg).unwrap();
    let jc = quadratic_covariation_paths(&combo.into(), &batch, &cfg).unwrap();
    let mut lin_ok = true;
    for ((a, b), c) in ja.iter().zip(jb.iter()).zip(jc.iter()) {
        lin_ok &= (1.5 * a - 0.5 * b - c).abs() <= 1e-10 * c.abs().max(1.0);
    }

    // skorohod = forward exactly at K = 1
    let bm = sample_paths(&ModelParams::brownian(), &grid, 16, SEED).unwrap();
    let f: Integrand = ScalarFunction::c2("identity", |x| x, |_| 1.0, |_| 0.0)
        .unwrap()
        .into();
    let sk = skorohod_integral_paths(&f, &bm, &cfg).unwrap();
    let fw = forward_integral_paths(&f, &bm, &cfg).unwrap();
    let sk_ok = sk == fw;

    // byte-for-byte determinism of an end-to-end report
    let text = "experiment = \"qv\"\nsteps = 256\nepsilon_multiple = 8\npaths = 40\nseed = 5\n";
    let ecfg = parse_config(text).unwrap();
    let a = emit_report(&run_experiment(&ecfg).unwrap(), OutputFormat::Csv).unwrap();
    let b = emit_report(&run_experiment(&ecfg).unwrap(), OutputFormat::Csv).unwrap();
    let det_ok = a == b;

    // qv of two equal-seed batches is bit-identical as well
    let qa = quadratic_variation_paths(&batch, &cfg).unwrap();
    let qb =
        quadratic_variation_paths(&sample_paths(&crit(), &grid, 32, SEED).unwrap(), &cfg).unwrap();
    let batch_ok = qa == qb;

    verdict(
        "9 (exact identities)",
        exact_ok && lin_ok && sk_ok && det_ok && batch_ok,
        &format!(
            "backward-forward {exact_ok}; linearity {lin_ok}; skorohod==forward {sk_ok}; bytes {det_ok}; resample {batch_ok}"
        ),
        started,
    );
}

#[test]
fn criterion_10_mollifier_ladder() {
    let started = Instant::now();
    let f = StepFunction::indicator(0.0, 1.0).unwrap();
    let batch = desk_batch(crit(), SEED);
    let cfg = desk_cfg();
    let j_f = quadratic_covariation_paths(&Integrand::Step(f.clone()), &batch, &cfg).unwrap();

    let mut norms = Vec::new();
    let mut gaps = Vec::new();
    for n in [4usize, 16, 64] {
        let smooth = mollify(&f, n).unwrap();
        let sc = smooth.clone();
        let fc = f.clone();
        let diff = move |x: f64| sc.eval(x) - fc.eval(x);
        let band = 2.0 / n as f64;
        norms.push(
            hnorm_fn(
                &diff,
                (-0.5, 1.0 + band),
                &[0.0, band, 1.0, 1.0 + band],
                1.0,
                1e-6,
            )
            .unwrap(),
        );
        let j_n = quadratic_covariation_paths(&Integrand::Scalar(smooth), &batch, &cfg).unwrap();
        let abs: Vec<f64> = (0..batch.n_paths())
            .map(|p| (j_n[[0, p]] - j_f[[0, p]]).abs())
            .collect();
        gaps.push(mean_stderr(&abs));
    }
    let norms_ok = norms.windows(2).all(|w| w[1] <= w[0]);
    let mut inversions = 0;
    let mut hard_fail = false;
    for w in gaps.windows(2) {
        let ((m0, s0), (m1, s1)) = (w[0], w[1]);
        if m1 > m0 {
            inversions += 1;
            if m1 - m0 > (s0 * s0 + s1 * s1).sqrt() {
                hard_fail = true;
            }
        }
    }
    let gaps_ok = !hard_fail && inversions <= 1;
    verdict(
        "10 (mollifier ladder)",
        norms_ok && gaps_ok,
        &format!(
            "hnorm ladder {:?}; J-gap ladder {:?}",
            norms,
            gaps.iter().map(|g| g.0).collect::<Vec<_>>()
        ),
        started,
    );
}
