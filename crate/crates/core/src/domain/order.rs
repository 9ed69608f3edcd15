use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fractional order `s` of the s-perimeter, restricted to the open interval (0, 1/2).
///
/// The graph linearization of the fractional curvature is a fractional
/// Laplacian of order `2 * sbar = 1 + 2s` acting on functions of `n - 1`
/// variables; `sigma_am` is the almost-minimality exponent with
/// `2 * sigma_am = 1 - 2s`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FractionalOrder {
    s: f64,
}

impl FractionalOrder {
    pub fn new(s: f64) -> Result<Self> {
        if !(s.is_finite() && s > 0.0 && s < 0.5) {
            return Err(Error::input(format!(
                "fractional order s = {s} outside the open interval (0, 1/2)"
            )));
        }
        Ok(Self { s })
    }

    #[inline]
    pub fn s(&self) -> f64 {
        self.s
    }

    /// Operator order parameter `1/2 + s`.
    #[inline]
    pub fn sbar(&self) -> f64 {
        0.5 + self.s
    }

    #[inline]
    pub fn sigma_am(&self) -> f64 {
        (1.0 - 2.0 * self.s) / 2.0
    }

    /// Optimal detachment exponent `1 + sbar`.
    #[inline]
    pub fn detachment_exponent(&self) -> f64 {
        1.0 + self.sbar()
    }

    /// Kernel exponent `n + 2s` in ambient dimension `n`.
    #[inline]
    pub fn kernel_exponent(&self, n: usize) -> f64 {
        n as f64 + 2.0 * self.s
    }
}

impl TryFrom<f64> for FractionalOrder {
    type Error = Error;

    fn try_from(s: f64) -> Result<Self> {
        Self::new(s)
    }
}

impl From<FractionalOrder> for f64 {
    fn from(o: FractionalOrder) -> f64 {
        o.s
    }
}
