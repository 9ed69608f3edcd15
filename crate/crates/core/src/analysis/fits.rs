use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{dyadic_radii, ExponentFit, MIN_RADII};
use crate::domain::{FractionalOrder, GraphFunction, IndicatorGrid};
use crate::energy::same_grid;
use crate::error::{Error, Result};

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Radius of the largest ball around `x` inside the graph's domain box.
fn inner_radius(u: &GraphFunction, x: &[f64]) -> f64 {
    x.iter().map(|c| u.radius() - c.abs()).fold(f64::INFINITY, f64::min)
}

/// `sup_{B_r(x0)} gap` over cell centers in the closed ball, for each radius.
fn ball_sups(grid: &GraphFunction, gap: &[f64], x0: usize, radii: &[f64]) -> Vec<f64> {
    let c0 = grid.center(x0);
    let mut by_dist: Vec<(f64, f64)> = (0..grid.len()).map(|i| (distance(&grid.center(i), &c0), gap[i])).collect();
    by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
    radii
        .iter()
        .map(|&r| {
            let lim = r * (1.0 + 1e-12);
            by_dist.iter().take_while(|p| p.0 <= lim).map(|p| p.1).fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

fn gap_profile(
    upper: &GraphFunction,
    lower: &GraphFunction,
    x0: usize,
    r_max: Option<f64>,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    same_grid(upper, lower)?;
    if x0 >= upper.len() {
        return Err(Error::input(format!("cell index {x0} outside the grid")));
    }
    let largest = inner_radius(upper, &upper.center(x0));
    let r_max = r_max.map_or(largest, |r| r.min(largest));
    let radii = dyadic_radii(upper.spacing(), r_max);
    if radii.len() < MIN_RADII {
        return Err(Error::InsufficientRadii { found: radii.len(), needed: MIN_RADII });
    }
    let gap: Vec<f64> = upper.values().iter().zip(lower.values()).map(|(a, b)| a - b).collect();
    let values = ball_sups(upper, &gap, x0, &radii);
    Ok((radii, values, r_max))
}

/// Growth exponent of `u - phi` away from the free-boundary cell `x0`:
/// the log-log slope of `sup_{B_r(x0)} (u - phi)` over dyadic radii from `4h`.
///
/// `window` restricts the radii entering the fit; by default every radius up
/// to the largest ball inside the domain is used.
pub fn fit_detachment_exponent(
    u: &GraphFunction,
    phi: &GraphFunction,
    x0: usize,
    window: Option<(f64, f64)>,
) -> Result<ExponentFit> {
    let (radii, values, r_max) = gap_profile(u, phi, x0, window.map(|w| w.1))?;
    let r_min = *radii.last().unwrap();
    let window = window.map_or((r_min, r_max), |w| (w.0.max(r_min), w.1));
    ExponentFit::fit(radii, values, window)
}

/// Classification of a point of the contact boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularPoint {
    pub regular: bool,
    /// `max_r r^{-(3/2+s)} sup_{B_r} (u - v)`.
    pub score: f64,
    /// Scaled profile at the smallest radius divided by its value at the largest.
    pub normalized: f64,
    pub threshold: f64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

/// Regular-point test at the contact-boundary cell `x0` of a two-membranes pair.
pub fn regular_point_test(
    u: &GraphFunction,
    v: &GraphFunction,
    x0: usize,
    order: FractionalOrder,
    threshold: f64,
    r_max: Option<f64>,
) -> Result<RegularPoint> {
    let (radii, values, _) = gap_profile(u, v, x0, r_max)?;
    let p = 1.0 + order.sbar();
    let scaled: Vec<f64> = radii.iter().zip(&values).map(|(r, w)| w / r.powf(p)).collect();
    let score = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let first = scaled[0];
    let normalized = if first > 0.0 { scaled[scaled.len() - 1] / first } else { 0.0 };
    Ok(RegularPoint { regular: normalized > threshold, score, normalized, threshold, radii, values })
}

/// Interface whose flatness is measured.
#[derive(Debug, Clone, Copy)]
pub enum Boundary<'a> {
    /// The graph `{(x', u(x'))}` sampled at cell centers.
    Graph(&'a GraphFunction),
    /// Centers of the boundary cells of a sharp set.
    Set(&'a IndicatorGrid),
}

impl Boundary<'_> {
    fn points(&self) -> Vec<Vec<f64>> {
        match self {
            Boundary::Graph(u) => (0..u.len())
                .map(|i| {
                    let mut p = u.center(i);
                    p.push(u.values()[i]);
                    p
                })
                .collect(),
            Boundary::Set(e) => e.boundary_cells().into_iter().map(|i| e.cell_center(i)).collect(),
        }
    }

    fn spacing(&self) -> f64 {
        match self {
            Boundary::Graph(u) => u.spacing(),
            Boundary::Set(e) => e.spacing(),
        }
    }

    fn inner_radius(&self, x0: &[f64]) -> f64 {
        match self {
            Boundary::Graph(u) => inner_radius(u, &x0[..u.dim()]),
            Boundary::Set(e) => {
                let up = e.upper();
                (0..e.dim())
                    .map(|a| (x0[a] - e.lower()[a]).min(up[a] - x0[a]))
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }
}

/// Flatness widths with the fitted normals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessFit {
    pub fit: ExponentFit,
    /// Unit normal of the principal plane at each radius.
    pub normals: Vec<Vec<f64>>,
    /// Angle between the normals at consecutive radii.
    pub angles: Vec<f64>,
}

/// Width `max |(x - x0) . e_r|` of the interface inside `B_r(x0)` around the
/// principal plane with normal `e_r`, fitted against `r`.
pub fn flatness_decay(boundary: Boundary<'_>, x0: &[f64], r_max: Option<f64>) -> Result<FlatnessFit> {
    let h = boundary.spacing();
    let pts = boundary.points();
    if pts.first().is_some_and(|p| p.len() != x0.len()) {
        return Err(Error::input("base point has the wrong dimension"));
    }
    let largest = boundary.inner_radius(x0);
    let r_max = r_max.map_or(largest, |r| r.min(largest));
    let radii = dyadic_radii(h, r_max);
    if radii.len() < MIN_RADII {
        return Err(Error::InsufficientRadii { found: radii.len(), needed: MIN_RADII });
    }
    let n = x0.len();
    let mut widths = Vec::with_capacity(radii.len());
    let mut normals: Vec<Vec<f64>> = Vec::with_capacity(radii.len());
    for &r in &radii {
        let inside: Vec<&Vec<f64>> = pts.iter().filter(|p| distance(p, x0) <= r * (1.0 + 1e-12)).collect();
        if inside.len() < n {
            return Err(Error::Resolution(format!("fewer than {n} interface points within radius {r}")));
        }
        let k = inside.len() as f64;
        let mean: Vec<f64> = (0..n).map(|a| inside.iter().map(|p| p[a]).sum::<f64>() / k).collect();
        let cov = DMatrix::from_fn(n, n, |a, b| {
            inside.iter().map(|p| (p[a] - mean[a]) * (p[b] - mean[b])).sum::<f64>() / k
        });
        let eig = SymmetricEigen::new(cov);
        let imin = (0..n).min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b])).unwrap();
        let mut e: Vec<f64> = eig.eigenvectors.column(imin).iter().copied().collect();
        let lead = (0..n).max_by(|&a, &b| e[a].abs().total_cmp(&e[b].abs())).unwrap();
        if e[lead] < 0.0 {
            e.iter_mut().for_each(|c| *c = -*c);
        }
        let w = inside
            .iter()
            .map(|p| p.iter().zip(x0).zip(&e).map(|((a, b), c)| (a - b) * c).sum::<f64>().abs())
            .fold(0.0, f64::max);
        widths.push(w);
        normals.push(e);
    }
    let angles = normals
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| a * b).sum::<f64>().abs().min(1.0).acos())
        .collect();
    let window = (*radii.last().unwrap(), radii[0]);
    let fit = if widths.iter().all(|w| *w <= h) {
        ExponentFit {
            radii,
            values: widths,
            slope: 0.0,
            intercept: 0.0,
            r_squared: 0.0,
            window,
            flag: Some("resolution floor: every width is at most h".into()),
        }
    } else {
        ExponentFit::fit(radii, widths, window)?
    };
    Ok(FlatnessFit { fit, normals, angles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ExteriorSpec, SetExterior};

    fn graph(h: f64, f: impl Fn(f64) -> f64) -> GraphFunction {
        GraphFunction::from_fn(1, 1.0, h, ExteriorSpec::Zero, |x| f(x[0])).unwrap()
    }

    #[test]
    fn synthetic_growth_exponents() {
        let h = 1.0 / 1024.0;
        let phi = graph(h, |_| 0.0);
        let x0 = phi.len() / 2;
        let c = phi.center(x0)[0];
        for p in [1.75, 2.0] {
            let u = graph(h, |x| (x - c).abs().powf(p));
            let fit = fit_detachment_exponent(&u, &phi, x0, None).unwrap();
            assert!((fit.slope - p).abs() < 0.01, "{p} {}", fit.slope);
        }
    }

    #[test]
    fn detachment_fit_ignores_constants() {
        let h = 1.0 / 256.0;
        let phi = graph(h, |x| -x * x);
        let u = graph(h, |x| (x - 0.1).max(0.0).powf(1.6) - x * x);
        let x0 = (0..u.len()).find(|&i| u.center(i)[0] > 0.1).unwrap();
        let a = fit_detachment_exponent(&u, &phi, x0, None).unwrap();
        let shift = |g: &GraphFunction| g.with_values(g.values().iter().map(|v| v + 3.0).collect()).unwrap();
        let b = fit_detachment_exponent(&shift(&u), &shift(&phi), x0, None).unwrap();
        assert!((a.slope - b.slope).abs() < 1e-12);
    }

    #[test]
    fn regular_point_scores() {
        let h = 1.0 / 1024.0;
        let order = FractionalOrder::new(0.25).unwrap();
        let v = graph(h, |_| 0.0);
        let x0 = v.len() / 2;
        let c = v.center(x0)[0];
        let reg = regular_point_test(&graph(h, |x| (x - c).abs().powf(1.75)), &v, x0, order, 0.1, None).unwrap();
        assert!(reg.regular && (reg.normalized - 1.0).abs() < 0.05);
        let flat = regular_point_test(&graph(h, |x| (x - c).powi(4)), &v, x0, order, 0.1, None).unwrap();
        assert!(!flat.regular);
        let scaled = regular_point_test(&graph(h, |x| 5.0 * (x - c).abs().powf(1.75)), &v, x0, order, 0.1, None).unwrap();
        assert!((scaled.score - 5.0 * reg.score).abs() < 1e-9 * scaled.score);
    }

    #[test]
    fn flatness_of_graph_and_half_space() {
        let h = 1.0 / 512.0;
        let u = graph(h, |x| x.abs().powf(1.75));
        let fit = flatness_decay(Boundary::Graph(&u), &[0.0, 0.0], Some(0.5)).unwrap();
        assert!((fit.fit.slope - 1.75).abs() < 0.05, "{}", fit.fit.slope);
        let ext = SetExterior::half_space(&[0.0, 1.0], 0.0).unwrap();
        let e = IndicatorGrid::centered(2, 1.0, 1.0 / 64.0, ext, |x| if x[1] < 0.0 { 1.0 } else { 0.0 }).unwrap();
        let flat = flatness_decay(Boundary::Set(&e), &[0.0, 0.0], None).unwrap();
        assert!(flat.fit.flag.is_some());
    }
}
