//! Randomized scanners for the closed-form covariance inequalities.
//!
//! Inequalities with explicit constants are enforced (the violation count
//! must stay at zero); bounds whose constants the analysis leaves
//! unspecified are only recorded as empirical ratio ranges.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{covariance, increment_covariance, moments};
use crate::params::ModelParams;

/// Whether a check enforces an explicit constant or only records ratios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundKind {
    Explicit,
    Empirical,
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityCheck {
    pub name: String,
    pub kind: BoundKind,
    pub samples: usize,
    /// Number of sampled tuples violating the explicit bound; always zero
    /// for empirical checks.
    pub violations: usize,
    /// Observed range of the check's ratio statistic.
    pub ratio_min: f64,
    pub ratio_max: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub h: f64,
    pub k: f64,
    pub t_horizon: f64,
    pub seed: u64,
    pub checks: Vec<InequalityCheck>,
}

impl InequalityReport {
    pub fn total_violations(&self) -> usize {
        self.checks.iter().map(|c| c.violations).sum()
    }

    pub fn check(&self, name: &str) -> Option<&InequalityCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tally {
    name: &'static str,
    kind: BoundKind,
    samples: usize,
    violations: usize,
    min: f64,
    max: f64,
}

impl Tally {
    fn new(name: &'static str, kind: BoundKind) -> Self {
        Self {
            name,
            kind,
            samples: 0,
            violations: 0,
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
        }
    }

    /// Record a ratio that must stay at or below 1; NaN counts as a
    /// violation.
    fn enforce(&mut self, ratio: f64) {
        self.samples += 1;
        self.min = self.min.min(ratio);
        self.max = self.max.max(ratio);
        if ratio.is_nan() || ratio > 1.0 + COMPARE_SLACK {
            self.violations += 1;
        }
    }

    /// Record a normalized quantity that must stay at or below 0.
    fn enforce_nonpositive(&mut self, value: f64) {
        self.samples += 1;
        self.min = self.min.min(value);
        self.max = self.max.max(value);
        if value.is_nan() || value > COMPARE_SLACK {
            self.violations += 1;
        }
    }

    fn record(&mut self, ratio: f64) {
        self.samples += 1;
        self.min = self.min.min(ratio);
        self.max = self.max.max(ratio);
    }

    fn finish(self) -> InequalityCheck {
        InequalityCheck {
            name: self.name.to_string(),
            kind: self.kind,
            samples: self.samples,
            violations: self.violations,
            ratio_min: self.min,
            ratio_max: self.max,
        }
    }
}

/// Relative slack absorbing round-off in ratios whose bounds are attained.
const COMPARE_SLACK: f64 = 1e-9;

/// Scans every inequality with `sample_pairs` random admissible tuples drawn
/// over `(delta, T]` with `T = 1` and `delta = 1e-3 T` (ratios are
/// scale-invariant under self-similarity, so the unit horizon is general).
///
/// Explicit-constant checks: the Lemma 2.2 bracket for `rho^2 / (r(s-r))`,
/// the quasi-helix increment-variance bracket, the ordered-increment bound
/// `|E dd'| <= (t-s)(t'-s')/s` (the proof-final constant 1), the three
/// explicit mixed-moment bounds `r/s (t-s)`, `4(t-r)`, `2(s-r)`, and the
/// one-sided bound `0 <= -E dd' <= (t-s)(t'-s')^{1-H} / ((1-H) s^{1-H})`.
///
/// Recorded-only checks: the normalized Lemma 2.1 ratio
/// `2^K (r - mu) / ((r/s)(s - r))`, whose endpoint limits are `2^K - 1` and
/// `1 - 2^{K-1}`, and the two ratios with unspecified constants.
pub fn lemma_scan(params: &ModelParams, sample_pairs: usize, seed: u64) -> Result<InequalityReport> {
    if sample_pairs < 1 {
        return Err(Error::domain("sample_pairs must be at least 1".to_string()));
    }
    if !params.is_critical() {
        return Err(Error::domain("lemma scans assume 2HK = 1".to_string()));
    }
    let t_horizon = 1.0;
    let delta = 1e-3 * t_horizon;
    // keep ratio denominators away from cancellation noise
    let min_gap = 1e-6 * t_horizon;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut draw_sorted = |n: usize, buf: &mut Vec<f64>| loop {
        buf.clear();
        for _ in 0..n {
            buf.push(rng.gen_range(delta..=t_horizon));
        }
        buf.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if buf.windows(2).all(|w| w[1] - w[0] >= min_gap) {
            return;
        }
    };

    let k = params.k();
    let h = params.h();
    let two_pow_k = k.exp2();
    let lemma22_hi = 1.0 + (1.0 - 2.0 * k).exp2();
    let helix_lo = (-k).exp2();
    let helix_hi = params.qv_constant();

    let mut l22_lo = Tally::new("lemma22_lower", BoundKind::Explicit);
    let mut l22_hi = Tally::new("lemma22_upper", BoundKind::Explicit);
    let mut l21 = Tally::new("lemma21_normalized_ratio", BoundKind::Empirical);
    let mut helix_l = Tally::new("quasi_helix_lower", BoundKind::Explicit);
    let mut helix_u = Tally::new("quasi_helix_upper", BoundKind::Explicit);
    let mut l23 = Tally::new("lemma23_proof_bound", BoundKind::Explicit);
    let mut l23_c = Tally::new("lemma23_empirical_constant", BoundKind::Empirical);
    let mut e29_sign = Tally::new("eq29_ordered_sign", BoundKind::Explicit);
    let mut e29_bound = Tally::new("eq29_explicit_bound", BoundKind::Explicit);
    let mut l24_3002 = Tally::new("lemma24_3002", BoundKind::Explicit);
    let mut l24_3003 = Tally::new("lemma24_3003", BoundKind::Explicit);
    let mut l24_3004 = Tally::new("lemma24_3004", BoundKind::Explicit);
    let mut l24_3001 = Tally::new("lemma24_3001_ratio", BoundKind::Empirical);

    let mut buf = Vec::with_capacity(4);
    for _ in 0..sample_pairs {
        // pairs s > r: Lemma 2.2 bracket and Lemma 2.1 ratio
        draw_sorted(2, &mut buf);
        let (r, s) = (buf[0], buf[1]);
        let m = moments(params, s, r)?;
        let base = r * (s - r);
        l22_lo.enforce(base / m.rho2);
        l22_hi.enforce(m.rho2 / (lemma22_hi * base));
        l21.record(two_pow_k * (r - m.mu) / ((r / s) * (s - r)));

        // pairs s < t: quasi-helix bracket
        draw_sorted(2, &mut buf);
        let (s2, t2) = (buf[0], buf[1]);
        let incr_var = increment_covariance(params, s2, t2, s2, t2)?;
        helix_l.enforce(helix_lo * (t2 - s2) / incr_var);
        helix_u.enforce(incr_var / (helix_hi * (t2 - s2)));

        // quadruples t > s >= t' > s': ordered-increment bounds
        draw_sorted(4, &mut buf);
        let (sp, tp, s4, t4) = (buf[0], buf[1], buf[2], buf[3]);
        let cross = increment_covariance(params, s4, t4, sp, tp)?;
        let scale = (t4 - s4) * (tp - sp);
        l23.enforce(cross.abs() * s4 / scale);
        l23_c.record(cross.abs() * s4 / scale);
        e29_sign.enforce_nonpositive(cross / scale); // ordered disjoint increments are negatively correlated
        let bound29 = (t4 - s4) * (tp - sp).powf(1.0 - h) / ((1.0 - h) * s4.powf(1.0 - h));
        e29_bound.enforce(-cross / bound29);

        // triples t > s > r: mixed moments E[B_.(B_. - B_.)]
        draw_sorted(3, &mut buf);
        let (r3, s3, t3) = (buf[0], buf[1], buf[2]);
        let b_r_ts = covariance(params, r3, t3)? - covariance(params, r3, s3)?;
        let b_s_tr = covariance(params, s3, t3)? - covariance(params, s3, r3)?;
        let b_t_sr = covariance(params, t3, s3)? - covariance(params, t3, r3)?;
        let b_s_ts = covariance(params, s3, t3)? - covariance(params, s3, s3)?;
        l24_3002.enforce(b_r_ts.abs() / ((r3 / s3) * (t3 - s3)));
        l24_3003.enforce(b_s_tr.abs() / (4.0 * (t3 - r3)));
        l24_3004.enforce(b_t_sr.abs() / (2.0 * (s3 - r3)));
        l24_3001.record(b_s_ts.abs() * t3 / (s3 * (t3 - s3)));
    }

    Ok(InequalityReport {
        h,
        k,
        t_horizon,
        seed,
        checks: vec![
            l22_lo.finish(),
            l22_hi.finish(),
            l21.finish(),
            helix_l.finish(),
            helix_u.finish(),
            l23.finish(),
            l23_c.finish(),
            e29_sign.finish(),
            e29_bound.finish(),
            l24_3002.finish(),
            l24_3003.finish(),
            l24_3004.finish(),
            l24_3001.finish(),
        ],
    })
}
