use serde::{Deserialize, Serialize};

use super::OracleReport;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdCheck {
    /// `value` is the smallest mismatch over the steps.
    pub report: OracleReport,
    pub steps: Vec<f64>,
    pub derivatives: Vec<f64>,
    pub mismatches: Vec<f64>,
    /// Convergence order between the two largest steps; `None` when the
    /// mismatch is already at rounding level there.
    pub observed_order: Option<f64>,
}

/// Central-difference derivative of `functional` at `x` along `direction`
/// for each step, compared with `<gradient, direction>`.
///
/// Mismatches are relative to the analytic derivative, or absolute when it
/// vanishes.
pub fn fd_gradient_check(
    functional: &dyn Fn(&[f64]) -> Result<f64>,
    gradient: &[f64],
    x: &[f64],
    direction: &[f64],
    steps: &[f64],
) -> Result<FdCheck> {
    if gradient.len() != x.len() || direction.len() != x.len() {
        return Err(Error::input("point, gradient and direction differ in length"));
    }
    if steps.len() < 3 || steps.windows(2).any(|w| !(w[1] < w[0])) || steps.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::input("need at least three positive, decreasing steps"));
    }
    let analytic: f64 = gradient.iter().zip(direction).map(|(g, d)| g * d).sum();
    let shifted = |t: f64| -> Vec<f64> { x.iter().zip(direction).map(|(a, d)| a + t * d).collect() };
    let derivatives: Vec<f64> = steps
        .iter()
        .map(|&t| Ok((functional(&shifted(t))? - functional(&shifted(-t))?) / (2.0 * t)))
        .collect::<Result<_>>()?;
    let scale = if analytic != 0.0 { analytic.abs() } else { 1.0 };
    let mismatches: Vec<f64> = derivatives.iter().map(|d| (d - analytic).abs() / scale).collect();
    let (best, &value) = mismatches
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("at least three steps");
    let floor = 1e-10;
    let observed_order = (mismatches[0] > floor && mismatches[1] > floor)
        .then(|| (mismatches[0] / mismatches[1]).ln() / (steps[0] / steps[1]).ln());
    let spread = derivatives.iter().fold(0.0f64, |m, d| m.max((d - derivatives[best]).abs())) / scale;
    Ok(FdCheck {
        report: OracleReport::new(value, "central difference", steps[best], spread)?,
        steps: steps.to_vec(),
        derivatives,
        mismatches,
        observed_order,
    })
}
