//! Model parameters: the exponent pair `(H, K)`.

use crate::error::{Error, Result};
use serde::Serialize;

/// Tolerance on the standing assumption `2HK = 1`, sized for double-precision
/// entry of `K = 1/(2H)`.
pub const CRITICAL_TOL: f64 = 1e-12;

/// The exponent pair `(H, K)` of a bi-fractional Brownian motion, the single
/// source of every derived constant.
///
/// [`ModelParams::new`] pins the pair to the critical curve `2HK = 1`;
/// [`ModelParams::general`] admits any valid pair, for covariance evaluation
/// and sampling without the identity guarantees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModelParams {
    h: f64,
    k: f64,
}

impl ModelParams {
    /// Critical-regime parameters: `0 < H < 1`, `0 < K <= 1` and `2HK = 1`
    /// within [`CRITICAL_TOL`].
    pub fn new(h: f64, k: f64) -> Result<Self> {
        let p = Self::general(h, k)?;
        if !p.is_critical() {
            return Err(Error::domain(format!(
                "2HK = {} differs from 1 by more than {CRITICAL_TOL:e}",
                2.0 * h * k
            )));
        }
        Ok(p)
    }

    /// Any admissible pair `0 < H < 1`, `0 < K <= 1`. Covariance and sampling
    /// remain valid; the `2HK = 1` identities do not.
    pub fn general(h: f64, k: f64) -> Result<Self> {
        if !h.is_finite() || !(0.0 < h && h < 1.0) {
            return Err(Error::domain(format!("H = {h} outside (0, 1)")));
        }
        if !k.is_finite() || !(0.0 < k && k <= 1.0) {
            return Err(Error::domain(format!("K = {k} outside (0, 1]")));
        }
        Ok(Self { h, k })
    }

    /// Brownian motion: `(H, K) = (1/2, 1)`.
    pub fn brownian() -> Self {
        Self { h: 0.5, k: 1.0 }
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn is_critical(&self) -> bool {
        (2.0 * self.h * self.k - 1.0).abs() <= CRITICAL_TOL
    }

    /// `2^{1-K}`, the quadratic-variation slope: `[B, B]_t = 2^{1-K} t`.
    pub fn qv_constant(&self) -> f64 {
        (1.0 - self.k).exp2()
    }

    /// `2^{K-2}`, the quadratic-covariation coefficient in the Ito formula
    /// `F(B_t) = F(0) + int f(B) dB + 2^{K-2} [f(B), B]_t`.
    pub fn ito_coefficient(&self) -> f64 {
        (self.k - 2.0).exp2()
    }

    /// `2^{K-1} - 1`, the coefficient relating forward and Skorohod
    /// integrals: `int f(B) d^-B = int f(B) dB + (1/2)(2^{K-1} - 1)[f(B), B]`.
    /// Exactly zero at `K = 1`.
    pub fn skorohod_coefficient(&self) -> f64 {
        (self.k - 1.0).exp2() - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_critical_pairs() {
        for (h, k) in [(0.5, 1.0), (0.75, 2.0 / 3.0), (0.625, 0.8)] {
            let p = ModelParams::new(h, k).unwrap();
            assert!(p.is_critical());
        }
    }

    #[test]
    fn rejects_out_of_range_and_off_critical() {
        assert!(ModelParams::new(0.0, 1.0).is_err());
        assert!(ModelParams::new(1.0, 0.5).is_err());
        assert!(ModelParams::new(0.5, 1.5).is_err());
        assert!(ModelParams::new(0.75, 0.7).is_err());
        assert!(ModelParams::general(0.75, 0.7).is_ok());
    }

    #[test]
    fn derived_constants() {
        let p = ModelParams::new(0.75, 2.0 / 3.0).unwrap();
        assert!((p.qv_constant() - 2f64.powf(1.0 / 3.0)).abs() < 1e-15);
        assert!((p.ito_coefficient() - 2f64.powf(-4.0 / 3.0)).abs() < 1e-15);
        // the two Bouleau-Yor normalizations are mutually inverse
        let prod = p.qv_constant() * (p.k() - 1.0).exp2();
        assert!((prod - 1.0).abs() < 1e-15);
        // the correction coefficient vanishes exactly in the Brownian case
        assert_eq!(ModelParams::brownian().skorohod_coefficient(), 0.0);
    }
}
