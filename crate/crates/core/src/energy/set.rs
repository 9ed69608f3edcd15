use std::f64::consts::PI;

use rayon::prelude::*;

use super::table::InteractionTable;
use crate::domain::{FractionalOrder, IndicatorGrid, SetExterior};
use crate::error::{Error, Result};
use crate::kernels::{ray_exit, ray_integral};
use crate::quad::{gl, integrate_adaptive, radial_mass, sphere_integral};

/// Axis-aligned box `[lower, upper]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Window {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(a, b)| !(a < b)) {
            return Err(Error::input("window bounds must satisfy lower < upper per axis"));
        }
        Ok(Self { lower, upper })
    }

    pub fn cube(dim: usize, half_width: f64) -> Self {
        Self {
            lower: vec![-half_width; dim],
            upper: vec![half_width; dim],
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (a, b))| *v >= *a && *v <= *b)
    }

    fn inside_box(&self, e: &IndicatorGrid) -> bool {
        let up = e.upper();
        (0..e.dim()).all(|a| self.lower[a] >= e.lower()[a] - 1e-12 && self.upper[a] <= up[a] + 1e-12)
    }
}

/// Relaxed s-perimeter `P(theta) = sum over pairs touching the window of
/// theta_i (1 - theta_j) W_ij`, including the frozen data outside the grid.
///
/// Pairs `i = j` are left out, so the energy is affine in each single cell
/// value and its first variation in the window cells is minus the cell
/// curvature field.
#[derive(Debug, Clone)]
pub struct SetEnergy {
    table: InteractionTable,
    dim: usize,
    counts: [usize; 3],
    lower: [f64; 3],
    h: f64,
    in_window: Vec<bool>,
    window_cells: Vec<usize>,
    /// `int_cell int_{outside, in E} K` for window cells.
    ext_in: Vec<f64>,
    /// `int_cell int_{outside, in CE} K` for window cells.
    ext_out: Vec<f64>,
}

impl SetEnergy {
    pub fn new(grid: &IndicatorGrid, order: FractionalOrder, window: &Window) -> Result<Self> {
        let dim = grid.dim();
        if window.lower.len() != dim {
            return Err(Error::input("window dimension does not match the grid"));
        }
        if !window.inside_box(grid) {
            return Err(Error::input("window must lie inside the grid box"));
        }
        let h = grid.spacing();
        let counts = grid.counts();
        let extent = *counts.iter().max().unwrap();
        let table = InteractionTable::new(dim, order.s(), h, extent)?;
        let in_window: Vec<bool> = (0..grid.len()).map(|i| window.contains(&grid.cell_center(i))).collect();
        let window_cells: Vec<usize> = (0..grid.len()).filter(|&i| in_window[i]).collect();
        let fields: Vec<(f64, f64)> = window_cells
            .par_iter()
            .map(|&i| exterior_fields(grid, order.s(), i))
            .collect();
        let mut ct = [1usize; 3];
        ct[..dim].copy_from_slice(counts);
        let mut lo = [0.0; 3];
        lo[..dim].copy_from_slice(grid.lower());
        Ok(Self {
            table,
            dim,
            counts: ct,
            lower: lo,
            h,
            in_window,
            window_cells,
            ext_in: fields.iter().map(|f| f.0).collect(),
            ext_out: fields.iter().map(|f| f.1).collect(),
        })
    }

    pub fn window_cells(&self) -> &[usize] {
        &self.window_cells
    }

    pub fn in_window(&self, idx: usize) -> bool {
        self.in_window[idx]
    }

    pub fn table(&self) -> &InteractionTable {
        &self.table
    }

    /// Interaction of grid cells `i != j`.
    pub fn pair_weight(&self, i: usize, j: usize) -> f64 {
        self.table.get(self.offset(i, j))
    }

    fn check(&self, e: &IndicatorGrid) -> Result<()> {
        let same = e.dim() == self.dim
            && e.counts() == &self.counts[..self.dim]
            && (e.spacing() - self.h).abs() <= 1e-12 * self.h
            && (0..self.dim).all(|a| (e.lower()[a] - self.lower[a]).abs() <= 1e-12);
        if same {
            Ok(())
        } else {
            Err(Error::input("indicator does not match the energy's grid"))
        }
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> [i64; 3] {
        let (a, b) = (self.multi(i), self.multi(j));
        [b[0] - a[0], b[1] - a[1], b[2] - a[2]]
    }

    #[inline]
    fn multi(&self, idx: usize) -> [i64; 3] {
        let i = idx % self.counts[0];
        let r = idx / self.counts[0];
        [i as i64, (r % self.counts[1]) as i64, (r / self.counts[1]) as i64]
    }

    /// The two parts `L(E ∩ W, CE)` and `L(E \ W, CE ∩ W)`.
    pub fn terms(&self, e: &IndicatorGrid) -> Result<(f64, f64)> {
        self.check(e)?;
        let theta = e.cells();
        let n = theta.len();
        let first: Vec<f64> = self
            .window_cells
            .par_iter()
            .enumerate()
            .map(|(w, &i)| {
                if theta[i] == 0.0 {
                    return 0.0;
                }
                let mut acc = 0.0;
                for (j, tj) in theta.iter().enumerate() {
                    if j != i && *tj != 1.0 {
                        acc += (1.0 - tj) * self.table.get(self.offset(i, j));
                    }
                }
                theta[i] * (acc + self.ext_out[w])
            })
            .collect();
        let second: Vec<f64> = self
            .window_cells
            .par_iter()
            .enumerate()
            .map(|(w, &j)| {
                if theta[j] == 1.0 {
                    return 0.0;
                }
                let mut acc = 0.0;
                for i in 0..n {
                    if !self.in_window[i] && theta[i] != 0.0 {
                        acc += theta[i] * self.table.get(self.offset(i, j));
                    }
                }
                (1.0 - theta[j]) * (acc + self.ext_in[w])
            })
            .collect();
        Ok((first.iter().sum(), second.iter().sum()))
    }

    pub fn energy(&self, e: &IndicatorGrid) -> Result<f64> {
        let (a, b) = self.terms(e)?;
        Ok(a + b)
    }

    /// Derivative of the energy in each window cell, ordered as [`Self::window_cells`].
    pub fn gradient(&self, e: &IndicatorGrid) -> Result<Vec<f64>> {
        self.check(e)?;
        let theta = e.cells();
        Ok(self
            .window_cells
            .par_iter()
            .enumerate()
            .map(|(w, &i)| {
                let mut acc = 0.0;
                for (j, tj) in theta.iter().enumerate() {
                    if j != i {
                        acc += (1.0 - 2.0 * tj) * self.table.get(self.offset(i, j));
                    }
                }
                acc + self.ext_out[w] - self.ext_in[w]
            })
            .collect())
    }
}

/// Exterior interaction fields of cell `idx`: mass of `E` and of `CE` outside the box.
fn exterior_fields(grid: &IndicatorGrid, s: f64, idx: usize) -> (f64, f64) {
    let n = grid.dim();
    let h = grid.spacing();
    let c = grid.cell_center(idx);
    let lower = grid.lower().to_vec();
    let upper = grid.upper();
    let gap = (0..n)
        .map(|a| (c[a] - lower[a]).min(upper[a] - c[a]))
        .fold(f64::INFINITY, f64::min);
    let (sub, pts) = if gap < 2.5 * h { (4usize, 2usize) } else if gap < 8.0 * h { (1, 3) } else { (1, 1) };
    let (gx, gw) = gl(pts);
    let sh = h / sub as f64;
    let per_axis = sub * pts;
    let total = per_axis.pow(n as u32);
    let mut mass = 0.0;
    let mut signed = 0.0;
    let mut x = vec![0.0; n];
    for q in 0..total {
        let mut rem = q;
        let mut wt = 1.0;
        for a in 0..n {
            let t = rem % per_axis;
            rem /= per_axis;
            let (cell, node) = (t / pts, t % pts);
            x[a] = c[a] - 0.5 * h + (cell as f64 + 0.5) * sh + 0.5 * sh * gx[node];
            wt *= 0.5 * sh * gw[node];
        }
        let m = box_exterior(grid, &x, &|w: &[f64]| radial_mass(ray_exit(&x, w, &lower, &upper), f64::INFINITY, s));
        let r = box_exterior(grid, &x, &|w: &[f64]| {
            let a = ray_exit(&x, w, &lower, &upper);
            ray_integral(grid.exterior(), &x, w, a, f64::INFINITY, s, f64::INFINITY)
        });
        mass += wt * m;
        signed += wt * r;
    }
    (0.5 * (mass + signed), 0.5 * (mass - signed))
}

/// Angular integral of a ray functional seen from `x` inside the grid box.
///
/// In the plane the circle is split where the exit ray passes a box corner or
/// runs parallel to a half-space boundary, so every arc carries a smooth
/// integrand.
fn box_exterior(grid: &IndicatorGrid, x: &[f64], ray: &(dyn Fn(&[f64]) -> f64 + Sync)) -> f64 {
    if grid.dim() != 2 || matches!(grid.exterior(), SetExterior::Custom(_)) {
        let tol = if grid.dim() == 2 { 1e-10 } else { 1e-9 };
        return sphere_integral(grid.dim(), ray, tol);
    }
    let (lo, up) = (grid.lower(), grid.upper());
    let mut breaks = vec![0.0, 2.0 * PI];
    for cx in [lo[0], up[0]] {
        for cy in [lo[1], up[1]] {
            breaks.push((cy - x[1]).atan2(cx - x[0]).rem_euclid(2.0 * PI));
        }
    }
    if let SetExterior::HalfSpace { normal, offset } = grid.exterior() {
        let t = normal[1].atan2(normal[0]);
        breaks.push((t + 0.5 * PI).rem_euclid(2.0 * PI));
        breaks.push((t - 0.5 * PI).rem_euclid(2.0 * PI));
        for a in 0..2 {
            let b = 1 - a;
            if normal[b] == 0.0 {
                continue;
            }
            for edge in [lo[a], up[a]] {
                let other = (offset - normal[a] * edge) / normal[b];
                if other >= lo[b] && other <= up[b] {
                    let mut p = [0.0; 2];
                    p[a] = edge;
                    p[b] = other;
                    breaks.push((p[1] - x[1]).atan2(p[0] - x[0]).rem_euclid(2.0 * PI));
                }
            }
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let f = |t: f64| ray(&[t.cos(), t.sin()]);
    breaks.windows(2).map(|w| integrate_adaptive(&f, w[0], w[1], 1e-13, 30)).sum()
}

/// `L(A ∩ W, B) = int_{A ∩ W} int_B |x - y|^{-(n+2s)}`, with `B` extended by
/// its exterior rule outside the grid.
pub fn interaction(a: &IndicatorGrid, b: &IndicatorGrid, order: FractionalOrder, window: &Window) -> Result<f64> {
    a.check_compatible(b)?;
    let energy = SetEnergy::new(b, order, window)?;
    let (ta, tb) = (a.cells(), b.cells());
    for &i in energy.window_cells() {
        if ta[i] * tb[i] > 0.0 {
            return Err(Error::Divergent(format!("both sets occupy cell {i}")));
        }
    }
    let ext_in = &energy.ext_in;
    let parts: Vec<f64> = energy
        .window_cells
        .par_iter()
        .enumerate()
        .map(|(w, &i)| {
            if ta[i] == 0.0 {
                return 0.0;
            }
            let mut acc = 0.0;
            for (j, tj) in tb.iter().enumerate() {
                if j != i && *tj != 0.0 {
                    acc += tj * energy.table.get(energy.offset(i, j));
                }
            }
            ta[i] * (acc + ext_in[w])
        })
        .collect();
    Ok(parts.iter().sum())
}

/// `P^s_W(E) = L(E ∩ W, CE) + L(E \ W, CE ∩ W)` for sharp or relaxed `E`.
pub fn s_perimeter(e: &IndicatorGrid, window: &Window, order: FractionalOrder) -> Result<f64> {
    SetEnergy::new(e, order, window)?.energy(e)
}

/// Perimeter of a sharp indicator inside the window: the indicator is
/// mollified with the normalized 3-cell box kernel along each axis and
/// `|grad|` is integrated with centered differences.
pub fn indicator_perimeter(f: &IndicatorGrid, window: &Window) -> Result<f64> {
    if !f.is_sharp() {
        return Err(Error::RequiresSharp);
    }
    let n = f.dim();
    let h = f.spacing();
    let value = |mi: [i64; 3]| f.lattice_value(mi);
    let smooth = |mi: [i64; 3]| -> f64 {
        let mut acc = 0.0;
        let r = if n == 3 { -1..=1 } else { 0..=0 };
        for dk in r {
            for dj in -1..=1 {
                for di in -1..=1 {
                    acc += value([mi[0] + di, mi[1] + dj, mi[2] + dk]);
                }
            }
        }
        acc / 3f64.powi(n as i32)
    };
    let total: f64 = (0..f.len())
        .into_par_iter()
        .filter(|&i| window.contains(&f.cell_center(i)))
        .map(|i| {
            let m = f.multi_index(i);
            let base = [m[0] as i64, m[1] as i64, m[2] as i64];
            let mut g2 = 0.0;
            for a in 0..n {
                let (mut up, mut dn) = (base, base);
                up[a] += 1;
                dn[a] -= 1;
                g2 += ((smooth(up) - smooth(dn)) / (2.0 * h)).powi(2);
            }
            g2.sqrt()
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(total * h.powi(n as i32))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn order(s: f64) -> FractionalOrder {
        FractionalOrder::new(s).unwrap()
    }

    fn disc(h: f64, half: f64, radius: f64) -> IndicatorGrid {
        IndicatorGrid::centered(2, half, h, SetExterior::Complement, |x| {
            if x[0] * x[0] + x[1] * x[1] < radius * radius {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn empty_set_has_no_perimeter() {
        let e = IndicatorGrid::centered(2, 1.0, 0.125, SetExterior::Complement, |_| 0.0).unwrap();
        assert_eq!(s_perimeter(&e, &Window::cube(2, 0.5), order(0.25)).unwrap(), 0.0);
    }

    #[test]
    fn gradient_matches_single_cell_differences() {
        let e = disc(0.125, 1.0, 0.45);
        let w = Window::cube(2, 0.75);
        let en = SetEnergy::new(&e, order(0.3), &w).unwrap();
        let g = en.gradient(&e).unwrap();
        let base = en.energy(&e).unwrap();
        for (k, &i) in en.window_cells().iter().enumerate().step_by(7) {
            let mut cells = e.cells().to_vec();
            let d = if cells[i] > 0.5 { -1.0 } else { 1.0 };
            cells[i] += d;
            let flipped = en.energy(&e.with_cells(cells).unwrap()).unwrap();
            assert!((flipped - base - g[k] * d).abs() < 1e-9 * base.abs().max(1.0));
        }
    }

    #[test]
    fn interaction_is_symmetric() {
        let h = 0.125;
        let a = IndicatorGrid::centered(2, 1.0, h, SetExterior::Complement, |x| if x[0] < -0.2 { 1.0 } else { 0.0 }).unwrap();
        let b = IndicatorGrid::centered(2, 1.0, h, SetExterior::Complement, |x| if x[0] > 0.3 && x[1] > 0.0 { 1.0 } else { 0.0 }).unwrap();
        let w = Window::cube(2, 1.0);
        let ab = interaction(&a, &b, order(0.25), &w).unwrap();
        let ba = interaction(&b, &a, order(0.25), &w).unwrap();
        assert!(ab > 0.0);
        assert!(((ab - ba) / ab).abs() < 1e-12);
        assert!(matches!(interaction(&a, &a, order(0.25), &w), Err(Error::Divergent(_))));
    }
}
