//! Uniform time discretization.

use serde::Serialize;

use crate::error::{Error, Result};

/// Uniform grid `t_i = i * delta`, `i = 0..=steps+pad`, with `delta = T/steps`.
///
/// The `pad` nodes extend the grid past `T` so that integrands shifted by
/// `epsilon = m * delta` stay defined up to `t = T`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimeGrid {
    t_horizon: f64,
    steps: usize,
    pad: usize,
}

impl TimeGrid {
    pub fn new(t_horizon: f64, steps: usize, pad: usize) -> Result<Self> {
        if !t_horizon.is_finite() || t_horizon <= 0.0 {
            return Err(Error::domain(format!("horizon T = {t_horizon} must be positive")));
        }
        if steps == 0 {
            return Err(Error::domain("grid needs at least one step".to_string()));
        }
        Ok(Self {
            t_horizon,
            steps,
            pad,
        })
    }

    pub fn t_horizon(&self) -> f64 {
        self.t_horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn pad(&self) -> usize {
        self.pad
    }

    pub fn delta(&self) -> f64 {
        self.t_horizon / self.steps as f64
    }

    /// Number of nodes including `t_0 = 0` and the pad.
    pub fn n_nodes(&self) -> usize {
        self.steps + self.pad + 1
    }

    pub fn node(&self, i: usize) -> f64 {
        debug_assert!(i < self.n_nodes());
        i as f64 * self.delta()
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(|i| self.node(i))
    }

    /// Index of a grid node, requiring `t` to sit on the grid within
    /// `1e-9 * max(T, 1)`.
    pub fn node_index(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * self.t_horizon.max(1.0);
        if !t.is_finite() || t < -tol {
            return Err(Error::domain(format!("time {t} is not on the grid")));
        }
        let i = (t / self.delta()).round() as usize;
        if i >= self.n_nodes() || (self.node(i) - t).abs() > tol {
            return Err(Error::domain(format!(
                "time {t} is not a grid node (delta = {})",
                self.delta()
            )));
        }
        Ok(i)
    }
}
