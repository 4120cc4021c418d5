//! Integrand carriers: elementary step functions and tagged scalar
//! function handles.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An elementary function: value `levels[j]` on `(breakpoints[j], breakpoints[j+1]]`
/// and zero outside `(breakpoints[0], breakpoints[N]]`.
///
/// Evaluation is left continuous with right limits: `f(a_j) = f_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    levels: Vec<f64>,
}

impl StepFunction {
    /// Breakpoints must be finite and strictly increasing, with one more
    /// breakpoint than levels. Both empty gives the zero function.
    pub fn new(breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        if breakpoints.is_empty() && levels.is_empty() {
            return Ok(Self {
                breakpoints,
                levels,
            });
        }
        if breakpoints.len() != levels.len() + 1 {
            return Err(Error::domain(format!(
                "step function needs levels.len() + 1 breakpoints, got {} and {}",
                breakpoints.len(),
                levels.len()
            )));
        }
        if breakpoints.iter().any(|a| !a.is_finite()) || levels.iter().any(|f| !f.is_finite()) {
            return Err(Error::domain("step function entries must be finite"));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("breakpoints must be strictly increasing"));
        }
        Ok(Self {
            breakpoints,
            levels,
        })
    }

    /// The indicator `1_{(a, b]}`.
    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![a, b], vec![1.0])
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// `(a_0, a_N)`, or `None` for the zero function.
    pub fn support(&self) -> Option<(f64, f64)> {
        if self.is_empty() {
            None
        } else {
            Some((self.breakpoints[0], *self.breakpoints.last().unwrap()))
        }
    }

    /// Left-continuous evaluation: `f(x) = f_j` iff `a_{j-1} < x <= a_j`.
    pub fn eval(&self, x: f64) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let idx = self.breakpoints.partition_point(|&a| a < x);
        if idx == 0 || idx == self.breakpoints.len() {
            0.0
        } else {
            self.levels[idx - 1]
        }
    }

    pub fn sup_abs(&self) -> f64 {
        self.levels.iter().fold(0.0, |m, f| m.max(f.abs()))
    }

    /// `c * f` on the same breakpoints.
    pub fn scale(&self, c: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            levels: self.levels.iter().map(|f| c * f).collect(),
        }
    }

    /// Pointwise sum on the shared refinement of both breakpoint sets.
    pub fn add(&self, other: &Self) -> Self {
        if self.is_empty() {
            return other.clone();
        }
        if other.is_empty() {
            return self.clone();
        }
        let mut merged: Vec<f64> = self
            .breakpoints
            .iter()
            .chain(other.breakpoints.iter())
            .copied()
            .collect();
        merged.sort_by(|a, b| a.partial_cmp(b).unwrap());
        merged.dedup();
        let levels = merged
            .windows(2)
            .map(|w| {
                // any interior point of (w[0], w[1]] picks up both levels;
                // the right endpoint is safe under left continuity
                self.eval(w[1]) + other.eval(w[1])
            })
            .collect();
        Self {
            breakpoints: merged,
            levels,
        }
    }

    /// Exact antiderivative `F(x) = int_{-inf}^x f(y) dy`, piecewise linear,
    /// with `F = 0` left of the support.
    pub fn antiderivative(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (j, f) in self.levels.iter().enumerate() {
            let (a, b) = (self.breakpoints[j], self.breakpoints[j + 1]);
            if x <= a {
                break;
            }
            acc += f * (x.min(b) - a);
        }
        acc
    }
}

/// Declared smoothness of a [`ScalarFunction`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Smoothness {
    Step,
    Lipschitz,
    C1,
    C2,
    CInf,
}

/// A real function handle plus a declared smoothness tag; tags `C1` and above
/// carry a derivative handle.
#[derive(Clone)]
pub struct ScalarFunction {
    label: String,
    smoothness: Smoothness,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    df: Option<Arc<dyn Fn(f64) -> f64 + Send + Sync>>,
}

impl std::fmt::Debug for ScalarFunction {
    fn fmt(&self, fm: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        fm.debug_struct("ScalarFunction")
            .field("label", &self.label)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

impl ScalarFunction {
    pub fn step_tag(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            smoothness: Smoothness::Step,
            f: Arc::new(f),
            df: None,
        }
    }

    pub fn lipschitz(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            smoothness: Smoothness::Lipschitz,
            f: Arc::new(f),
            df: None,
        }
    }

    pub fn c1(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            smoothness: Smoothness::C1,
            f: Arc::new(f),
            df: Some(Arc::new(df)),
        }
    }

    /// A `C^2` handle. The supplied second derivative is probed against a
    /// central finite difference of `df` (relative error `1e-5`); it is kept
    /// only as that consistency certificate, no operation consumes it.
    pub fn c2(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2f: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        const PROBES: [f64; 8] = [-2.3, -1.1, -0.35, 0.0, 0.4, 0.9, 1.7, 2.6];
        for &x in &PROBES {
            let e = 1e-4 * x.abs().max(1.0);
            let fd = (df(x + e) - df(x - e)) / (2.0 * e);
            let want = d2f(x);
            let scale = want.abs().max(fd.abs()).max(1.0);
            if (fd - want).abs() > 1e-5 * scale {
                return Err(Error::domain(format!(
                    "second derivative mismatch at x = {x}: handle {want}, finite difference {fd}"
                )));
            }
        }
        Ok(Self {
            label: label.into(),
            smoothness: Smoothness::C2,
            f: Arc::new(f),
            df: Some(Arc::new(df)),
        })
    }

    pub fn c_inf(
        label: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        df: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            smoothness: Smoothness::CInf,
            f: Arc::new(f),
            df: Some(Arc::new(df)),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn has_derivative(&self) -> bool {
        self.df.is_some()
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        match &self.df {
            Some(df) => Ok(df(x)),
            None => Err(Error::domain(format!(
                "function `{}` (tag {:?}) carries no derivative handle",
                self.label, self.smoothness
            ))),
        }
    }
}

/// Either integrand class accepted by the estimators.
#[derive(Debug, Clone)]
pub enum Integrand {
    Step(StepFunction),
    Scalar(ScalarFunction),
}

impl Integrand {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Integrand::Step(f) => f.eval(x),
            Integrand::Scalar(f) => f.eval(x),
        }
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        match self {
            Integrand::Step(_) => Err(Error::domain(
                "step functions carry no derivative handle".to_string(),
            )),
            Integrand::Scalar(f) => f.derivative(x),
        }
    }

    pub fn has_derivative(&self) -> bool {
        matches!(self, Integrand::Scalar(f) if f.has_derivative())
    }

    pub fn label(&self) -> &str {
        match self {
            Integrand::Step(_) => "step",
            Integrand::Scalar(f) => f.label(),
        }
    }
}

impl From<StepFunction> for Integrand {
    fn from(f: StepFunction) -> Self {
        Integrand::Step(f)
    }
}

impl From<ScalarFunction> for Integrand {
    fn from(f: ScalarFunction) -> Self {
        Integrand::Scalar(f)
    }
}

/// `sign(x - a)` with the left-continuous convention `sign(0) = -1`.
pub fn sign_shift(a: f64) -> ScalarFunction {
    ScalarFunction::step_tag(format!("sign(.-{a})"), move |x| {
        if x <= a {
            -1.0
        } else {
            1.0
        }
    })
}
