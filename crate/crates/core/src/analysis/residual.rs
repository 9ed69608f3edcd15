use serde::{Deserialize, Serialize};

use super::{csv_table, num};
use crate::domain::{ContactSet, GraphFunction};
use crate::energy::same_grid;
use crate::error::{Error, Result};
use crate::kernels::{fractional_curvature_graph_all, KernelSpec};

/// Cells whose centers lie within this many spacings of the domain edge are
/// left out of the audit.
pub const RING_CELLS: f64 = 8.0;

/// Forcing fields of the two-membranes problem, sampled at cell centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    /// Forcing acting on the nonlocal membrane `u`.
    pub f: Vec<f64>,
    /// Forcing acting on the classical membrane `v`.
    pub g: Vec<f64>,
}

impl Forcing {
    pub fn zero(n: usize) -> Self {
        Self { f: vec![0.0; n], g: vec![0.0; n] }
    }

    pub fn from_graphs(f: &GraphFunction, g: &GraphFunction) -> Result<Self> {
        same_grid(f, g)?;
        Ok(Self { f: f.values().to_vec(), g: g.values().to_vec() })
    }
}

/// Mean curvature `div(grad v / sqrt(1 + |grad v|^2))` in flux form with
/// centered differences at the cell faces.
pub fn mean_curvature(v: &GraphFunction) -> Vec<f64> {
    let h = v.spacing();
    let at = |i: i64, j: i64| v.lattice_value(i, j);
    (0..v.len())
        .map(|idx| {
            let [i, j] = v.multi_index(idx);
            let (i, j) = (i as i64, j as i64);
            if v.dim() == 1 {
                let flux = |a: i64| {
                    let d = (at(a + 1, 0) - at(a, 0)) / h;
                    d / (1.0 + d * d).sqrt()
                };
                return (flux(i) - flux(i - 1)) / h;
            }
            let fx = |a: i64, b: i64| {
                let dx = (at(a + 1, b) - at(a, b)) / h;
                let dy = (at(a, b + 1) - at(a, b - 1) + at(a + 1, b + 1) - at(a + 1, b - 1)) / (4.0 * h);
                dx / (1.0 + dx * dx + dy * dy).sqrt()
            };
            let fy = |a: i64, b: i64| {
                let dy = (at(a, b + 1) - at(a, b)) / h;
                let dx = (at(a + 1, b) - at(a - 1, b) + at(a + 1, b + 1) - at(a - 1, b + 1)) / (4.0 * h);
                dy / (1.0 + dx * dx + dy * dy).sqrt()
            };
            (fx(i, j) - fx(i - 1, j) + fy(i, j) - fy(i, j - 1)) / h
        })
        .collect()
}

/// Euler-Lagrange audit of a two-membranes pair.
///
/// With `kappa = mean_curvature(v)` and `K = K_E` the fractional curvature of
/// the subgraph of `u`, a stationary pair satisfies `kappa + K = f + g` on the
/// contact set, together with `kappa >= g` everywhere, `K <= f` on and near the
/// contact set and `kappa + 2K <= 2f + g` on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElReport {
    /// Contact cells away from the domain edge and from the contact boundary.
    pub cells: Vec<usize>,
    /// `kappa + K - f - g` on `cells`.
    pub residual: Vec<f64>,
    pub kappa: Vec<f64>,
    pub curvature: Vec<f64>,
    /// Contact cells left out because they lie near the domain edge.
    pub excluded: Vec<usize>,
    /// Audited cells (away from the edge).
    pub audited: Vec<usize>,
    pub tol: f64,
    pub max_residual: f64,
    /// `max (g - kappa)` over audited cells. Each excess is `-inf` when no
    /// cell qualifies.
    pub kappa_excess: f64,
    /// `max (K - f)` over audited cells on or next to the contact set.
    pub curvature_excess: f64,
    /// `max (kappa + 2K - 2f - g)` over audited contact cells.
    pub combined_excess: f64,
    /// `max (|kappa - g|, |K - f|)` over audited cells off the contact set.
    pub free_residual: f64,
    pub flags: Vec<String>,
}

impl ElReport {
    pub fn one_sided_hold(&self) -> bool {
        self.kappa_excess <= self.tol && self.curvature_excess <= self.tol && self.combined_excess <= self.tol
    }

    /// One row per audited cell.
    pub fn to_csv(&self, grid: &GraphFunction, contact: &ContactSet) -> Result<String> {
        let dim = grid.dim();
        let mut header = vec!["cell", "x0"];
        if dim == 2 {
            header.push("x1");
        }
        header.extend(["contact", "kappa", "curvature", "residual"]);
        let rows: Vec<Vec<String>> = self
            .audited
            .iter()
            .map(|&i| {
                let res = self.cells.binary_search(&i).map_or(f64::NAN, |k| self.residual[k]);
                let mut row = vec![i.to_string()];
                row.extend(grid.center(i).into_iter().map(num));
                row.extend([
                    contact.contains(i).to_string(),
                    num(self.kappa[i]),
                    num(self.curvature[i]),
                    num(res),
                ]);
                row
            })
            .collect();
        csv_table(&header, &rows)
    }
}

/// Runs the Euler-Lagrange audit; `forcing` defaults to zero.
pub fn euler_lagrange_residual(
    u: &GraphFunction,
    v: &GraphFunction,
    contact: &ContactSet,
    spec: &KernelSpec,
    forcing: Option<&Forcing>,
    tol: f64,
) -> Result<ElReport> {
    same_grid(u, v)?;
    let n = u.len();
    let zero = Forcing::zero(n);
    let forcing = forcing.unwrap_or(&zero);
    if forcing.f.len() != n || forcing.g.len() != n {
        return Err(Error::input("forcing fields do not match the grid"));
    }
    if contact.indices.iter().any(|&i| i >= n) {
        return Err(Error::input("contact set does not match the grid"));
    }
    let kappa = mean_curvature(v);
    let curvature = fractional_curvature_graph_all(u, spec)?;
    let h = u.spacing();
    let m = u.axis_len() as i64;
    let near_edge = |i: usize| {
        u.center(i).iter().any(|c| u.radius() - c.abs() < RING_CELLS * h)
    };
    let audited: Vec<usize> = (0..n).filter(|&i| !near_edge(i)).collect();
    let excluded: Vec<usize> = contact.indices.iter().copied().filter(|&i| near_edge(i)).collect();
    let cells: Vec<usize> = contact
        .indices
        .iter()
        .copied()
        .filter(|&i| !near_edge(i) && contact.boundary_indices.binary_search(&i).is_err())
        .collect();
    let (f, g) = (&forcing.f, &forcing.g);
    let residual: Vec<f64> = cells.iter().map(|&i| kappa[i] + curvature[i] - f[i] - g[i]).collect();
    let near_contact = |i: usize| {
        let [a, b] = u.multi_index(i);
        let (a, b) = (a as i64, b as i64);
        let jr = if u.dim() == 1 { 0..=0 } else { -1..=1 };
        jr.clone().any(|dj| {
            (-1..=1).any(|di| {
                let (x, y) = (a + di, b + dj);
                x >= 0 && x < m && y >= 0 && (u.dim() == 1 || y < m) && contact.contains(u.flat_index([x as usize, y as usize]))
            })
        })
    };
    let fold = |it: &mut dyn Iterator<Item = f64>| it.fold(f64::NEG_INFINITY, f64::max);
    let kappa_excess = fold(&mut audited.iter().map(|&i| g[i] - kappa[i]));
    let curvature_excess = fold(&mut audited.iter().filter(|&&i| near_contact(i)).map(|&i| curvature[i] - f[i]));
    let combined_excess = fold(
        &mut audited
            .iter()
            .filter(|&&i| contact.contains(i))
            .map(|&i| kappa[i] + 2.0 * curvature[i] - 2.0 * f[i] - g[i]),
    );
    let free_residual = audited
        .iter()
        .filter(|&&i| !contact.contains(i))
        .map(|&i| (kappa[i] - g[i]).abs().max((curvature[i] - f[i]).abs()))
        .fold(0.0, f64::max);
    let mut flags = Vec::new();
    if !excluded.is_empty() {
        flags.push(format!("{} contact cells within {RING_CELLS}h of the domain edge were excluded", excluded.len()));
    }
    Ok(ElReport {
        max_residual: residual.iter().map(|r| r.abs()).fold(0.0, f64::max),
        cells,
        residual,
        kappa,
        curvature,
        excluded,
        audited,
        tol,
        kappa_excess,
        curvature_excess,
        combined_excess,
        free_residual,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ExteriorSpec, FractionalOrder};

    #[test]
    fn flat_pair_has_zero_residual() {
        let h = 1.0 / 32.0;
        let u = GraphFunction::from_fn(1, 1.0, h, ExteriorSpec::Zero, |_| 0.0).unwrap();
        let contact = ContactSet::from_gap(&u, u.values(), 1e-12).unwrap();
        let spec = KernelSpec::new(FractionalOrder::new(0.25).unwrap(), h).unwrap();
        let r = euler_lagrange_residual(&u, &u, &contact, &spec, None, 1e-10).unwrap();
        assert!(!r.cells.is_empty());
        assert!(r.max_residual < 1e-12);
        assert!(r.one_sided_hold());
        assert!(!r.flags.is_empty());
    }

    #[test]
    fn mean_curvature_of_a_circle_arc() {
        let h = 1.0 / 256.0;
        let v = GraphFunction::from_fn(1, 0.5, h, ExteriorSpec::Zero, |x| (1.0 - x[0] * x[0]).sqrt()).unwrap();
        let v = v.with_exterior(ExteriorSpec::Zero).unwrap();
        let k = mean_curvature(&v);
        for i in 16..v.len() - 16 {
            assert!((k[i] + 1.0).abs() < 10.0 * h, "{}", k[i]);
        }
    }
}
