//! Regularity measurements on solver output: exponent fits, regular-point
//! classification, Hölder seminorms, Euler-Lagrange residuals, flatness decay
//! and almost-minimality audits. Every analysis can be written as CSV.

mod audit;
mod fits;
mod holder;
mod residual;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use audit::{almost_minimality_audit, ball_complement_interaction, AuditRecord, AuditTrial};
pub use fits::{fit_detachment_exponent, flatness_decay, regular_point_test, Boundary, FlatnessFit, RegularPoint};
pub use holder::{holder_seminorm, linearization_modulus, sample_pairs, ModulusFit};
pub use residual::{euler_lagrange_residual, ElReport, Forcing};

/// Smallest admissible fit radius in units of the spacing.
pub const MIN_RADIUS_CELLS: f64 = 4.0;

/// Number of radii a power-law fit needs.
pub const MIN_RADII: usize = 4;

/// Log-log least-squares fit of `values ~ radii^slope`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExponentFit {
    /// Strictly decreasing dyadic radii.
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(r_min, r_max)` of the radii used in the fit.
    pub window: (f64, f64),
    pub flag: Option<String>,
}

impl ExponentFit {
    /// Fits `log values` against `log radii` over the radii within `window`.
    pub fn fit(radii: Vec<f64>, values: Vec<f64>, window: (f64, f64)) -> Result<Self> {
        if radii.len() != values.len() {
            return Err(Error::input("radii and values differ in length"));
        }
        if radii.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::input("radii must be strictly decreasing"));
        }
        let tol = 1e-9 * window.1;
        let used: Vec<(f64, f64)> = radii
            .iter()
            .zip(&values)
            .filter(|(r, v)| **r >= window.0 - tol && **r <= window.1 + tol && **v > 0.0)
            .map(|(r, v)| (r.ln(), v.ln()))
            .collect();
        if used.len() < MIN_RADII {
            return Err(Error::InsufficientRadii { found: used.len(), needed: MIN_RADII });
        }
        let (slope, intercept, r_squared) = least_squares(&used);
        Ok(Self { radii, values, slope, intercept, r_squared, window, flag: None })
    }

    pub fn in_window(&self, r: f64) -> bool {
        let tol = 1e-9 * self.window.1;
        r >= self.window.0 - tol && r <= self.window.1 + tol
    }

    /// Rows `radius,value,in_window`.
    pub fn to_csv(&self) -> Result<String> {
        let rows = self
            .radii
            .iter()
            .zip(&self.values)
            .map(|(r, v)| vec![num(*r), num(*v), self.in_window(*r).to_string()])
            .collect::<Vec<_>>();
        csv_table(&["radius", "value", "in_window"], &rows)
    }

    /// JSON summary without the per-radius data.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "slope": self.slope,
            "intercept": self.intercept,
            "r_squared": self.r_squared,
            "r_min": self.window.0,
            "r_max": self.window.1,
            "flag": self.flag,
        })
    }
}

/// Slope, intercept and coefficient of determination of a line through `pts`.
pub(crate) fn least_squares(pts: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    (slope, intercept, r2)
}

/// Dyadic radii `4h 2^k <= r_max`, largest first.
pub fn dyadic_radii(spacing: f64, r_max: f64) -> Vec<f64> {
    let mut r = MIN_RADIUS_CELLS * spacing;
    let mut out = Vec::new();
    while r <= r_max * (1.0 + 1e-12) {
        out.push(r);
        r *= 2.0;
    }
    out.reverse();
    out
}

/// Decimal text with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Comma-separated table with a header row.
pub fn csv_table(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let wrap = |e: csv::Error| Error::input(format!("csv: {e}"));
    w.write_record(header).map_err(wrap)?;
    for r in rows {
        w.write_record(r).map_err(wrap)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::input(format!("csv: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::input(format!("csv: {e}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_law_is_recovered() {
        let radii = dyadic_radii(1.0 / 1024.0, 0.5);
        let values: Vec<f64> = radii.iter().map(|r| 3.0 * r.powf(1.75)).collect();
        let fit = ExponentFit::fit(radii, values, (0.0, 1.0)).unwrap();
        assert!((fit.slope - 1.75).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-10);
        assert!(fit.to_csv().unwrap().starts_with("radius,value,in_window\n"));
    }

    #[test]
    fn too_few_radii_is_an_error() {
        let radii = dyadic_radii(0.25, 4.0);
        let values = vec![1.0; radii.len()];
        assert!(matches!(ExponentFit::fit(radii, values, (1.0, 4.0)), Err(Error::InsufficientRadii { .. })));
    }
}
