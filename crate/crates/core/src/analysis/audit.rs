use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::{csv_table, num};
use crate::domain::{FractionalOrder, IndicatorGrid};
use crate::energy::{indicator_perimeter, Window};
use crate::error::{Error, Result};

/// `L(B_1, C B_1) = int_{B_1} int_{C B_1} |x - y|^{-n-2s} dy dx` in dimension
/// `n` (2 or 3).
///
/// Integrating first along the chords of the ball parallel to each direction
/// gives `|S^{n-1}| / (2s (1 - 2s)) int_{B^{n-1}} (2 sqrt(1 - |y|^2))^{1-2s} dy`.
pub fn ball_complement_interaction(n: usize, order: FractionalOrder) -> Result<f64> {
    let s = order.s();
    let a = 1.0 - 2.0 * s;
    let chords = match n {
        2 => 2f64.powf(a) * PI.sqrt() * (ln_gamma(0.5 * (3.0 - 2.0 * s)) - ln_gamma(2.0 - s)).exp(),
        3 => 2f64.powf(a) * 2.0 * PI / (3.0 - 2.0 * s),
        _ => return Err(Error::input(format!("ball interaction needs dimension 2 or 3, got {n}"))),
    };
    let sphere = if n == 2 { 2.0 * PI } else { 4.0 * PI };
    Ok(sphere * chords / (2.0 * s * a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditTrial {
    pub center: Vec<f64>,
    pub radius: f64,
    /// `Per(F) - Per(F ∪ B_r)`.
    pub lhs: f64,
    /// `L(B_r, C B_r) = C_hat r^{n-2s}`.
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub c_hat: f64,
    pub trials: Vec<AuditTrial>,
    pub violations: usize,
    /// Largest `lhs / (C_hat r^{n-2s})`.
    pub sharpest_ratio: f64,
    /// Candidate balls rejected for leaving the region.
    pub resampled: usize,
}

impl AuditRecord {
    pub fn to_csv(&self) -> Result<String> {
        let dim = self.trials.first().map_or(2, |t| t.center.len());
        let mut header: Vec<String> = vec!["trial".into()];
        header.extend((0..dim).map(|a| format!("x{a}")));
        header.extend(["radius", "lhs", "rhs", "ratio", "holds"].map(String::from));
        let rows: Vec<Vec<String>> = self
            .trials
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let mut row = vec![k.to_string()];
                row.extend(t.center.iter().map(|v| num(*v)));
                row.extend([num(t.radius), num(t.lhs), num(t.rhs), num(t.lhs / t.rhs), t.holds.to_string()]);
                row
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        csv_table(&header, &rows)
    }
}

fn with_ball(e: &IndicatorGrid, center: &[f64], r: f64) -> Result<IndicatorGrid> {
    let cells = (0..e.len())
        .map(|i| {
            let d2: f64 = e.cell_center(i).iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
            if d2 <= r * r {
                1.0
            } else {
                e.cells()[i]
            }
        })
        .collect();
    e.with_cells(cells)
}

/// Perturbs the pair `F ⊂ E` by random balls `B_r(x0) ⊂ region` and checks
/// `Per(F) - Per(F ∪ B_r) <= L(B_r, C B_r)` for each.
///
/// Trial `k` draws its ball from the seed `seed + k`; radii are uniform in
/// `radii`. Balls that leave `region` or come within four cells of the grid
/// box are redrawn.
pub fn almost_minimality_audit(
    f: &IndicatorGrid,
    e: &IndicatorGrid,
    order: FractionalOrder,
    trials: usize,
    seed: u64,
    radii: (f64, f64),
    region: &Window,
) -> Result<AuditRecord> {
    f.check_compatible(e)?;
    if !(f.is_sharp() && e.is_sharp()) {
        return Err(Error::RequiresSharp);
    }
    if f.cells().iter().zip(e.cells()).any(|(a, b)| a > b) {
        return Err(Error::Ordering("F must be contained in E".into()));
    }
    let n = f.dim();
    if region.lower.len() != n || !(radii.0 > 0.0 && radii.0 <= radii.1) {
        return Err(Error::input("audit region or radius range is invalid"));
    }
    let h = f.spacing();
    let up = f.upper();
    let margin = 4.0 * h;
    let c_hat = ball_complement_interaction(n, order)?;
    let exponent = n as f64 - 2.0 * order.s();
    let outcomes: Vec<(AuditTrial, usize)> = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
            let mut rejected = 0;
            let (center, r) = loop {
                let r = rng.random_range(radii.0..=radii.1);
                let c: Vec<f64> = (0..n).map(|a| rng.random_range(region.lower[a]..region.upper[a])).collect();
                let fits = (0..n).all(|a| {
                    c[a] - r >= region.lower[a]
                        && c[a] + r <= region.upper[a]
                        && c[a] - r >= f.lower()[a] + margin
                        && c[a] + r <= up[a] - margin
                });
                if fits {
                    break (c, r);
                }
                rejected += 1;
                if rejected > 100_000 {
                    return Err(Error::input("no admissible ball fits the audit region"));
                }
            };
            let lo: Vec<f64> = center.iter().map(|c| c - r - margin).collect();
            let hi: Vec<f64> = center.iter().map(|c| c + r + margin).collect();
            let local = Window::new(lo, hi)?;
            let f2 = with_ball(f, &center, r)?;
            let e2 = with_ball(e, &center, r)?;
            debug_assert!(f2.cells().iter().zip(e2.cells()).all(|(a, b)| a <= b));
            let lhs = indicator_perimeter(f, &local)? - indicator_perimeter(&f2, &local)?;
            let rhs = c_hat * r.powf(exponent);
            Ok((AuditTrial { center, radius: r, lhs, rhs, holds: lhs <= rhs }, rejected))
        })
        .collect::<Result<_>>()?;
    let resampled = outcomes.iter().map(|o| o.1).sum();
    let trials: Vec<AuditTrial> = outcomes.into_iter().map(|o| o.0).collect();
    Ok(AuditRecord {
        c_hat,
        violations: trials.iter().filter(|t| !t.holds).count(),
        sharpest_ratio: trials.iter().map(|t| t.lhs / t.rhs).fold(f64::NEG_INFINITY, f64::max),
        trials,
        resampled,
    })
}
