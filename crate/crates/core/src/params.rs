//! Dimension and smoothness parameters shared across the reduction.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Ambient dimension n, derivative order m, lower-bound dimension d of the
/// measure. Requires n >= 2, 1 <= m < n, 0 < d <= n.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SobolevParams {
    pub n: u32,
    pub m: u32,
    pub d: f64,
}

/// Which side of d = n - m the measure dimension falls on. The fast regime
/// (d >= n - m) needs only the single Hardy operator; the slow regime brings
/// in the companion operators with the t^{-m/(n-d)} weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Fast,
    Slow,
}

impl SobolevParams {
    pub fn new(n: u32, m: u32, d: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::BadDimension(format!("n must be >= 2, got {n}")));
        }
        if m == 0 || m >= n {
            return Err(Error::BadDimension(format!(
                "m must satisfy 1 <= m < n, got m={m}, n={n}"
            )));
        }
        if !(d > 0.0 && d <= n as f64) || !d.is_finite() {
            return Err(Error::BadDimension(format!(
                "d must lie in (0, {n}], got {d}"
            )));
        }
        Ok(SobolevParams { n, m, d })
    }

    pub fn regime(&self) -> Regime {
        if self.d >= (self.n - self.m) as f64 {
            Regime::Fast
        } else {
            Regime::Slow
        }
    }

    /// n/d, the exponent carrying a d-dimensional profile to volume scale.
    pub fn n_over_d(&self) -> f64 {
        self.n as f64 / self.d
    }

    /// m/n, the smoothness gain per unit of volume scale.
    pub fn m_over_n(&self) -> f64 {
        self.m as f64 / self.n as f64
    }

    /// m/d.
    pub fn m_over_d(&self) -> f64 {
        self.m as f64 / self.d
    }

    /// m/(n-d): the slow-regime weight exponent. Only meaningful when d < n.
    pub fn m_over_n_minus_d(&self) -> f64 {
        self.m as f64 / (self.n as f64 - self.d)
    }
}

/// Volume of the unit ball in R^n, by the two-step recursion
/// w_n = 2 pi w_{n-2} / n with w_0 = 1, w_1 = 2.
pub fn unit_ball_volume(n: u32) -> f64 {
    match n {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI * unit_ball_volume(n - 2) / n as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn ball_volumes() {
        assert!((unit_ball_volume(2) - PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-15);
        assert!((unit_ball_volume(4) - PI * PI / 2.0).abs() < 1e-15);
        assert!((unit_ball_volume(5) - 8.0 * PI * PI / 15.0).abs() < 1e-14);
    }

    #[test]
    fn admissibility() {
        assert!(SobolevParams::new(3, 1, 2.0).is_ok());
        assert!(SobolevParams::new(1, 1, 0.5).is_err());
        assert!(SobolevParams::new(3, 3, 2.0).is_err());
        assert!(SobolevParams::new(3, 0, 2.0).is_err());
        assert!(SobolevParams::new(3, 1, 0.0).is_err());
        assert!(SobolevParams::new(3, 1, 3.5).is_err());
    }

    #[test]
    fn regime_boundary_is_fast() {
        assert_eq!(SobolevParams::new(3, 1, 2.0).unwrap().regime(), Regime::Fast);
        assert_eq!(SobolevParams::new(3, 1, 2.5).unwrap().regime(), Regime::Fast);
        assert_eq!(SobolevParams::new(3, 1, 1.5).unwrap().regime(), Regime::Slow);
        assert_eq!(SobolevParams::new(4, 1, 1.0).unwrap().regime(), Regime::Slow);
    }
}
