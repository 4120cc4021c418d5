//! Experiment configuration: a flat key-value (TOML) schema with validation
//! diagnostics that name the offending key.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::function::StepFunction;
use crate::params::CRITICAL_TOL;

/// The experiment catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Qv,
    Qc,
    Forward,
    Backward,
    Skorohod,
    Ito,
    Tanaka,
    BouleauYor,
    Occupation,
    LemmaScan,
    Hnorm,
    MollifyLadder,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Qv => "qv",
            Experiment::Qc => "qc",
            Experiment::Forward => "forward",
            Experiment::Backward => "backward",
            Experiment::Skorohod => "skorohod",
            Experiment::Ito => "ito",
            Experiment::Tanaka => "tanaka",
            Experiment::BouleauYor => "bouleau-yor",
            Experiment::Occupation => "occupation",
            Experiment::LemmaScan => "lemma-scan",
            Experiment::Hnorm => "hnorm",
            Experiment::MollifyLadder => "mollify-ladder",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ALL.iter()
            .copied()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::config("experiment", format!("unknown experiment `{s}`")))
    }

    /// Experiments whose targets rest on the `2HK = 1` identities.
    pub fn requires_critical(&self) -> bool {
        matches!(
            self,
            Experiment::Qv
                | Experiment::Qc
                | Experiment::Skorohod
                | Experiment::Ito
                | Experiment::Tanaka
                | Experiment::BouleauYor
                | Experiment::LemmaScan
        )
    }

    /// Whether the experiment samples paths at all.
    pub fn needs_batch(&self) -> bool {
        !matches!(self, Experiment::LemmaScan | Experiment::Hnorm)
    }
}

const ALL: [Experiment; 12] = [
    Experiment::Qv,
    Experiment::Qc,
    Experiment::Forward,
    Experiment::Backward,
    Experiment::Skorohod,
    Experiment::Ito,
    Experiment::Tanaka,
    Experiment::BouleauYor,
    Experiment::Occupation,
    Experiment::LemmaScan,
    Experiment::Hnorm,
    Experiment::MollifyLadder,
];

/// Integrand selection from the built-in catalog or explicit step data.
#[derive(Debug, Clone, PartialEq)]
pub enum FunctionSpec {
    One,
    Identity,
    Square,
    AbsShift(f64),
    GaussianBump,
    Step(StepFunction),
}

impl FunctionSpec {
    pub fn name(&self) -> &'static str {
        match self {
            FunctionSpec::One => "one",
            FunctionSpec::Identity => "identity",
            FunctionSpec::Square => "square",
            FunctionSpec::AbsShift(_) => "abs-shift",
            FunctionSpec::GaussianBump => "gaussian-bump",
            FunctionSpec::Step(_) => "step",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// A fully validated experiment description; every field is concrete.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub h: f64,
    pub k: f64,
    pub t_horizon: f64,
    pub steps: usize,
    pub epsilon_multiple: usize,
    pub n_paths: usize,
    pub seed: u64,
    pub eval_times: Vec<f64>,
    pub function: FunctionSpec,
    pub space_min: f64,
    pub space_max: f64,
    pub space_points: usize,
    /// `None` selects the default bandwidth for the grid.
    pub bandwidth: Option<f64>,
    pub tanaka_level: f64,
    pub scan_samples: usize,
    pub mollify_orders: Vec<usize>,
    pub ito_mode: ItoModeKey,
    pub out: Option<String>,
    pub format: OutputFormat,
    pub timestamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ItoModeKey {
    Forward,
    Skorohod,
}

/// `h` and `k` accept either a number or a rational string such as `"2/3"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum NumberOrRational {
    Number(f64),
    Text(String),
}

impl NumberOrRational {
    fn resolve(&self, field: &str) -> Result<f64> {
        match self {
            NumberOrRational::Number(v) => Ok(*v),
            NumberOrRational::Text(s) => {
                if let Some((p, q)) = s.split_once('/') {
                    let p: f64 = p
                        .trim()
                        .parse()
                        .map_err(|_| Error::config(field, format!("bad rational `{s}`")))?;
                    let q: f64 = q
                        .trim()
                        .parse()
                        .map_err(|_| Error::config(field, format!("bad rational `{s}`")))?;
                    if q == 0.0 {
                        return Err(Error::config(field, "zero denominator"));
                    }
                    Ok(p / q)
                } else {
                    s.trim()
                        .parse()
                        .map_err(|_| Error::config(field, format!("bad number `{s}`")))
                }
            }
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<String>,
    h: Option<NumberOrRational>,
    k: Option<NumberOrRational>,
    t: Option<f64>,
    steps: Option<usize>,
    epsilon_multiple: Option<usize>,
    /// Optional redundant spelling of the window width; must equal an
    /// integer multiple of `delta`.
    epsilon: Option<f64>,
    paths: Option<usize>,
    seed: Option<u64>,
    eval_times: Option<Vec<f64>>,
    function: Option<String>,
    shift: Option<f64>,
    breakpoints: Option<Vec<f64>>,
    levels: Option<Vec<f64>>,
    space_min: Option<f64>,
    space_max: Option<f64>,
    space_points: Option<usize>,
    bandwidth: Option<f64>,
    tanaka_level: Option<f64>,
    scan_samples: Option<usize>,
    mollify_orders: Option<Vec<usize>>,
    ito_mode: Option<String>,
    out: Option<String>,
    format: Option<String>,
    timestamp: Option<bool>,
}

/// Parses and validates structured key-value text (TOML). Unknown keys,
/// malformed values and constraint violations are rejected with a
/// diagnostic naming the key.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text)
        .map_err(|e| Error::config("<config>", e.message().to_string()))?;
    resolve(raw, None)
}

/// As [`parse_config`] but with the experiment supplied externally (the CLI
/// positional overrides the config key).
pub fn parse_config_with_experiment(text: &str, experiment: Option<&str>) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text)
        .map_err(|e| Error::config("<config>", e.message().to_string()))?;
    resolve(raw, experiment)
}

fn resolve(mut raw: RawConfig, experiment_override: Option<&str>) -> Result<ExperimentConfig> {
    let experiment = match experiment_override.map(String::from).or(raw.experiment.take()) {
        Some(name) => Experiment::parse(&name)?,
        None => return Err(Error::config("experiment", "missing experiment")),
    };

    let h = match &raw.h {
        Some(v) => v.resolve("h")?,
        None => 0.75,
    };
    let k = match &raw.k {
        Some(v) => v.resolve("k")?,
        None => 2.0 / 3.0,
    };
    if !(h.is_finite() && 0.0 < h && h < 1.0) {
        return Err(Error::config("h", format!("H = {h} outside (0, 1)")));
    }
    if !(k.is_finite() && 0.0 < k && k <= 1.0) {
        return Err(Error::config("k", format!("K = {k} outside (0, 1]")));
    }
    if experiment.requires_critical() && (2.0 * h * k - 1.0).abs() > CRITICAL_TOL {
        return Err(Error::config(
            "k",
            format!(
                "experiment `{}` requires 2HK = 1, got 2HK = {}",
                experiment.name(),
                2.0 * h * k
            ),
        ));
    }

    let t_horizon = raw.t.unwrap_or(1.0);
    if !(t_horizon.is_finite() && t_horizon > 0.0) {
        return Err(Error::config("t", "horizon must be positive"));
    }
    let steps = raw.steps.unwrap_or(2048);
    if steps == 0 {
        return Err(Error::config("steps", "needs at least one step"));
    }
    let delta = t_horizon / steps as f64;
    let epsilon_multiple = raw.epsilon_multiple.unwrap_or(16);
    if epsilon_multiple == 0 {
        return Err(Error::config("epsilon_multiple", "must be at least 1"));
    }
    if let Some(eps) = raw.epsilon {
        let ratio = eps / delta;
        if eps.is_nan() || eps <= 0.0 || (ratio - ratio.round()).abs() > 1e-9 * ratio.abs().max(1.0) {
            return Err(Error::config(
                "epsilon",
                format!("epsilon = {eps} is not a positive multiple of delta = {delta}"),
            ));
        }
        let m = ratio.round() as usize;
        if raw.epsilon_multiple.is_some() && m != epsilon_multiple {
            return Err(Error::config(
                "epsilon",
                "conflicts with epsilon_multiple".to_string(),
            ));
        }
        return resolve_rest(
            raw,
            experiment,
            h,
            k,
            t_horizon,
            steps,
            m,
        );
    }
    resolve_rest(raw, experiment, h, k, t_horizon, steps, epsilon_multiple)
}

fn resolve_rest(
    raw: RawConfig,
    experiment: Experiment,
    h: f64,
    k: f64,
    t_horizon: f64,
    steps: usize,
    epsilon_multiple: usize,
) -> Result<ExperimentConfig> {
    let delta = t_horizon / steps as f64;
    let n_paths = raw.paths.unwrap_or(500);
    if n_paths == 0 {
        return Err(Error::config("paths", "needs at least one path"));
    }
    let seed = raw.seed.unwrap_or(42);

    let eval_times = raw.eval_times.unwrap_or_else(|| vec![t_horizon]);
    if eval_times.is_empty() {
        return Err(Error::config("eval_times", "must not be empty"));
    }
    if eval_times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("eval_times", "must be strictly increasing"));
    }
    for &t in &eval_times {
        let ratio = t / delta;
        if t.is_nan()
            || t <= 0.0
            || t > t_horizon * (1.0 + 1e-12)
            || (ratio - ratio.round()).abs() > 1e-9 * ratio.abs().max(1.0)
        {
            return Err(Error::config(
                "eval_times",
                format!("t = {t} is not a grid node in (0, T]"),
            ));
        }
    }

    let function = match raw.function.as_deref() {
        None => default_function(experiment),
        Some("one") => FunctionSpec::One,
        Some("identity") => FunctionSpec::Identity,
        Some("square") => FunctionSpec::Square,
        Some("abs-shift") => FunctionSpec::AbsShift(raw.shift.unwrap_or(0.0)),
        Some("gaussian-bump") => FunctionSpec::GaussianBump,
        Some("step") => {
            let breakpoints = raw
                .breakpoints
                .ok_or_else(|| Error::config("breakpoints", "required for function = \"step\""))?;
            let levels = raw
                .levels
                .ok_or_else(|| Error::config("levels", "required for function = \"step\""))?;
            let f = StepFunction::new(breakpoints, levels)
                .map_err(|e| Error::config("breakpoints", e.to_string()))?;
            FunctionSpec::Step(f)
        }
        Some(other) => {
            return Err(Error::config(
                "function",
                format!("unknown function `{other}`"),
            ))
        }
    };

    let space_min = raw.space_min.unwrap_or(-4.0 * t_horizon.sqrt());
    let space_max = raw.space_max.unwrap_or(4.0 * t_horizon.sqrt());
    if space_min.is_nan() || space_max.is_nan() || space_min >= space_max {
        return Err(Error::config("space_min", "space_min must be below space_max"));
    }
    let space_points = raw.space_points.unwrap_or(401);
    if space_points < 2 {
        return Err(Error::config("space_points", "needs at least 2 nodes"));
    }
    if let Some(b) = raw.bandwidth {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::config("bandwidth", "must be positive"));
        }
    }
    let tanaka_level = raw.tanaka_level.unwrap_or(0.0);
    let scan_samples = raw.scan_samples.unwrap_or(10_000);
    if scan_samples == 0 {
        return Err(Error::config("scan_samples", "must be at least 1"));
    }
    let mollify_orders = raw.mollify_orders.unwrap_or_else(|| vec![4, 16, 64]);
    if mollify_orders.is_empty() || mollify_orders.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config(
            "mollify_orders",
            "must be non-empty and strictly increasing",
        ));
    }
    if mollify_orders.contains(&0) {
        return Err(Error::config("mollify_orders", "orders must be at least 1"));
    }
    let ito_mode = match raw.ito_mode.as_deref() {
        None | Some("forward") => ItoModeKey::Forward,
        Some("skorohod") => ItoModeKey::Skorohod,
        Some(other) => {
            return Err(Error::config(
                "ito_mode",
                format!("expected forward|skorohod, got `{other}`"),
            ))
        }
    };
    let format = match raw.format.as_deref() {
        None | Some("csv") => OutputFormat::Csv,
        Some("json") => OutputFormat::Json,
        Some(other) => {
            return Err(Error::config(
                "format",
                format!("expected csv|json, got `{other}`"),
            ))
        }
    };

    Ok(ExperimentConfig {
        experiment,
        h,
        k,
        t_horizon,
        steps,
        epsilon_multiple,
        n_paths,
        seed,
        eval_times,
        function,
        space_min,
        space_max,
        space_points,
        bandwidth: raw.bandwidth,
        tanaka_level,
        scan_samples,
        mollify_orders,
        ito_mode,
        out: raw.out,
        format,
        timestamp: raw.timestamp.unwrap_or(false),
    })
}

fn default_function(experiment: Experiment) -> FunctionSpec {
    match experiment {
        Experiment::Ito => FunctionSpec::Square,
        Experiment::Occupation => FunctionSpec::One,
        Experiment::BouleauYor => {
            FunctionSpec::Step(StepFunction::indicator(-1.0, 1.0).expect("static"))
        }
        Experiment::Hnorm | Experiment::MollifyLadder => {
            FunctionSpec::Step(StepFunction::indicator(0.0, 1.0).expect("static"))
        }
        _ => FunctionSpec::Identity,
    }
}

/// Serializes a validated config back to the flat TOML schema;
/// `parse(emit(parse(text)))` is idempotent.
pub fn emit_config(cfg: &ExperimentConfig) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    kv("experiment", format!("{:?}", cfg.experiment.name()));
    kv("h", format!("{:?}", cfg.h));
    kv("k", format!("{:?}", cfg.k));
    kv("t", format!("{:?}", cfg.t_horizon));
    kv("steps", cfg.steps.to_string());
    kv("epsilon_multiple", cfg.epsilon_multiple.to_string());
    kv("paths", cfg.n_paths.to_string());
    kv("seed", cfg.seed.to_string());
    kv("eval_times", fmt_array(&cfg.eval_times));
    kv("function", format!("{:?}", cfg.function.name()));
    match &cfg.function {
        FunctionSpec::AbsShift(a) => kv("shift", format!("{a:?}")),
        FunctionSpec::Step(f) => {
            kv("breakpoints", fmt_array(f.breakpoints()));
            kv("levels", fmt_array(f.levels()));
        }
        _ => {}
    }
    kv("space_min", format!("{:?}", cfg.space_min));
    kv("space_max", format!("{:?}", cfg.space_max));
    kv("space_points", cfg.space_points.to_string());
    if let Some(b) = cfg.bandwidth {
        kv("bandwidth", format!("{b:?}"));
    }
    kv("tanaka_level", format!("{:?}", cfg.tanaka_level));
    kv("scan_samples", cfg.scan_samples.to_string());
    kv(
        "mollify_orders",
        format!(
            "[{}]",
            cfg.mollify_orders
                .iter()
                .map(|n| n.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        ),
    );
    let mode = match cfg.ito_mode {
        ItoModeKey::Forward => "forward",
        ItoModeKey::Skorohod => "skorohod",
    };
    kv("ito_mode", format!("{mode:?}"));
    if let Some(o) = &cfg.out {
        kv("out", format!("{o:?}"));
    }
    let fmt = match cfg.format {
        OutputFormat::Csv => "csv",
        OutputFormat::Json => "json",
    };
    kv("format", format!("{fmt:?}"));
    kv("timestamp", cfg.timestamp.to_string());
    out
}

fn fmt_array(vals: &[f64]) -> String {
    format!(
        "[{}]",
        vals.iter()
            .map(|v| format!("{v:?}"))
            .collect::<Vec<_>>()
            .join(", ")
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_qv_config_with_rational_k() {
        let cfg = parse_config("experiment = \"qv\"\nh = 0.75\nk = \"2/3\"\n").unwrap();
        assert_eq!(cfg.experiment, Experiment::Qv);
        assert!((cfg.k - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(cfg.steps, 2048);
        assert_eq!(cfg.epsilon_multiple, 16);
        assert_eq!(cfg.n_paths, 500);
        assert_eq!(cfg.eval_times, vec![1.0]);
    }

    #[test]
    fn off_critical_identity_experiment_rejected() {
        let err = parse_config("experiment = \"bouleau-yor\"\nh = 0.75\nk = 0.7\n").unwrap_err();
        match err {
            Error::Config { field, .. } => assert_eq!(field, "k"),
            other => panic!("expected config error, got {other:?}"),
        }
        // but a non-identity experiment accepts the same pair
        assert!(parse_config("experiment = \"forward\"\nh = 0.75\nk = 0.7\n").is_ok());
    }

    #[test]
    fn epsilon_must_sit_on_grid() {
        let err =
            parse_config("experiment = \"qv\"\nsteps = 100\nepsilon = 0.0123\n").unwrap_err();
        match err {
            Error::Config { field, .. } => assert_eq!(field, "epsilon"),
            other => panic!("{other:?}"),
        }
        let cfg = parse_config("experiment = \"qv\"\nsteps = 100\nepsilon = 0.05\n").unwrap();
        assert_eq!(cfg.epsilon_multiple, 5);
    }

    #[test]
    fn eval_times_validated_at_parse_time() {
        let err = parse_config("experiment = \"qv\"\nsteps = 8\neval_times = [0.3]\n").unwrap_err();
        match err {
            Error::Config { field, .. } => assert_eq!(field, "eval_times"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_keys_and_experiments_rejected() {
        assert!(parse_config("experiment = \"qv\"\nbogus = 1\n").is_err());
        assert!(parse_config("experiment = \"frobnicate\"\n").is_err());
        assert!(parse_config("").is_err()); // missing experiment
    }

    #[test]
    fn step_function_keys() {
        let cfg = parse_config(
            "experiment = \"bouleau-yor\"\nfunction = \"step\"\nbreakpoints = [-1.0, 1.0]\nlevels = [1.0]\n",
        )
        .unwrap();
        match &cfg.function {
            FunctionSpec::Step(f) => assert_eq!(f.levels(), &[1.0]),
            other => panic!("{other:?}"),
        }
        assert!(parse_config("experiment = \"qc\"\nfunction = \"step\"\n").is_err());
    }

    #[test]
    fn round_trip_is_idempotent() {
        let text = "experiment = \"bouleau-yor\"\nh = 0.75\nk = \"2/3\"\nsteps = 256\npaths = 50\nfunction = \"step\"\nbreakpoints = [-1.0, 1.0]\nlevels = [1.0]\nseed = 7\n";
        let once = parse_config(text).unwrap();
        let twice = parse_config(&emit_config(&once)).unwrap();
        assert_eq!(once, twice);
    }
}
