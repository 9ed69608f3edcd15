//! Brute-force references: dense quadratures, exhaustive minimizers and
//! finite-difference gradient checks. Oracles refuse instances beyond their
//! budgets instead of running for hours.

mod dense;
mod enumerate;
mod fd;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::record;

pub use dense::{dense_interaction, dense_quadratic_energy, PAIR_BUDGET};
pub use enumerate::{exhaustive_active_set, exhaustive_set_min, ActiveSetOutcome, SetOutcome, MAX_FREE_CELLS};
pub use fd::{fd_gradient_check, FdCheck};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub value: f64,
    pub method: String,
    /// Finest spacing or step used.
    pub resolution: f64,
    /// Difference between the two finest resolutions; zero for exact enumerations.
    pub estimated_error: f64,
}

/// Outcome of comparing a main-path value against an oracle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The oracle's own error estimate is not below the tolerance.
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

impl OracleReport {
    pub fn new(value: f64, method: impl Into<String>, resolution: f64, estimated_error: f64) -> Result<Self> {
        let method = method.into();
        if method.is_empty() || !(estimated_error >= 0.0) {
            return Err(Error::input("oracle reports need a method tag and a non-negative error"));
        }
        Ok(Self { value, method, resolution, estimated_error })
    }

    /// Compares `main` with the oracle value at absolute tolerance `tol`.
    pub fn verdict(&self, main: f64, tol: f64) -> Verdict {
        if !(self.estimated_error < tol) {
            Verdict::Inconclusive
        } else if (main - self.value).abs() <= tol {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    /// Key/value record in the format used by energy breakdowns.
    pub fn to_record(&self) -> String {
        format!(
            "method = {}\n{}",
            self.method,
            record::write(&[
                ("value", self.value),
                ("resolution", self.resolution),
                ("estimated_error", self.estimated_error),
            ])
        )
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let map = record::parse(text)?;
        let method = map
            .get("method")
            .cloned()
            .ok_or(Error::Parse { line: 0, msg: "missing key method".into() })?;
        Self::new(
            record::get(&map, "value")?,
            method,
            record::get(&map, "resolution")?,
            record::get(&map, "estimated_error")?,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trip_and_verdicts() {
        let r = OracleReport::new(1.25, "dense subcell sum", 0.01, 1e-9).unwrap();
        assert_eq!(OracleReport::from_record(&r.to_record()).unwrap(), r);
        assert_eq!(r.verdict(1.25 + 1e-8, 1e-7), Verdict::Pass);
        assert_eq!(r.verdict(1.3, 1e-7), Verdict::Fail);
        assert_eq!(r.verdict(1.25, 1e-10), Verdict::Inconclusive);
        assert!(OracleReport::new(1.0, "", 0.1, 0.0).is_err());
    }
}
