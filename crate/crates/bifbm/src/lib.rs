//! Simulation and verification toolkit for bi-fractional Brownian motion
//! (bi-fBm) in the critical regime `2HK = 1`.
//!
//! A bi-fBm with indices `H in (0,1)`, `K in (0,1]` is the centered Gaussian
//! process with covariance
//!
//! ```text
//! R(t, s) = 2^{-K} [ (t^{2H} + s^{2H})^K - |t - s|^{2HK} ]
//! ```
//!
//! On the curve `2HK = 1` the process has finite non-trivial quadratic
//! variation `[B, B]_t = 2^{1-K} t`, which makes a Brownian-style pathwise
//! calculus available: quadratic covariations `[f(B), B]`, forward/backward
//! Riemann-window integrals, a Skorohod integral recovered through the
//! forward-integral correction, local time, and the Bouleau-Yor identity
//! `[f(B), B]_t = -2^{1-K} \int f(x) L(dx, t)`.
//!
//! The crate is organized as:
//!
//! - [`kernel`]: deterministic analytic core (covariance, moments, heat
//!   kernel, the `H`-norm of integrands, inequality scanners);
//! - [`sampler`]: exact Gaussian sampling on a uniform grid by dense
//!   covariance factorization with reproducible per-path substreams;
//! - [`estimators`]: finite-`epsilon` realizations of the limit definitions
//!   (quadratic variation/covariation, forward/backward/Skorohod integrals,
//!   Ito-formula residuals);
//! - [`localtime`]: window local-time estimation, the Stieltjes integral
//!   against local time, Tanaka and Bouleau-Yor residuals, mollifiers;
//! - [`harness`]: configuration-driven experiment runner behind the `bifbm`
//!   CLI, emitting deterministic CSV/JSON reports.

pub mod error;
pub mod estimators;
pub mod function;
pub mod grid;
pub mod harness;
pub mod kernel;
pub mod localtime;
pub mod math;
pub mod params;
mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use function::{Integrand, ScalarFunction, Smoothness, StepFunction};
pub use grid::TimeGrid;
pub use params::ModelParams;
pub use sampler::PathBatch;
