use serde::{Deserialize, Serialize};

use super::graph::GraphFunction;
use crate::error::{Error, Result};

/// Membership rule for points outside an [`IndicatorGrid`]'s box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SetExterior {
    /// `{x : x . normal < offset}` with a unit normal.
    HalfSpace { normal: Vec<f64>, offset: f64 },
    /// Every exterior point lies in the complement of the set.
    Complement,
    /// Every exterior point belongs to the set.
    Full,
    /// A coarser indicator (with its own exterior rule) describes the exterior.
    Custom(Box<IndicatorGrid>),
}

impl SetExterior {
    pub fn half_space(normal: &[f64], offset: f64) -> Result<Self> {
        let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::input("half-space normal must be nonzero"));
        }
        Ok(SetExterior::HalfSpace {
            normal: normal.iter().map(|v| v / norm).collect(),
            offset: offset / norm,
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            SetExterior::HalfSpace { normal, offset } => {
                let d: f64 = normal.iter().zip(x).map(|(a, b)| a * b).sum();
                if d < *offset {
                    1.0
                } else {
                    0.0
                }
            }
            SetExterior::Complement => 0.0,
            SetExterior::Full => 1.0,
            SetExterior::Custom(g) => g.indicator_at(x).unwrap_or(0.0),
        }
    }

    pub fn complement(&self) -> Self {
        match self {
            SetExterior::HalfSpace { normal, offset } => SetExterior::HalfSpace {
                normal: normal.iter().map(|v| -v).collect(),
                offset: -offset,
            },
            SetExterior::Complement => SetExterior::Full,
            SetExterior::Full => SetExterior::Complement,
            SetExterior::Custom(g) => SetExterior::Custom(Box::new(g.complement())),
        }
    }

    /// Rule that applies far away (beyond any custom grid).
    pub fn far_rule(&self) -> &SetExterior {
        match self {
            SetExterior::Custom(g) => g.exterior().far_rule(),
            other => other,
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            SetExterior::HalfSpace { normal, offset } => {
                let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                if normal.len() != dim || (norm - 1.0).abs() > 1e-12 || !offset.is_finite() {
                    return Err(Error::input("half-space exterior needs a unit normal of matching dimension"));
                }
                Ok(())
            }
            SetExterior::Custom(g) => {
                if g.dim() != dim {
                    return Err(Error::input("custom exterior grid has the wrong dimension"));
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// Relaxed indicator of a set on an axis-aligned box of cubic cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorGrid {
    dim: usize,
    lower: [f64; 3],
    counts: [usize; 3],
    spacing: f64,
    cells: Vec<f64>,
    exterior: SetExterior,
}

impl IndicatorGrid {
    pub fn new(
        dim: usize,
        lower: &[f64],
        counts: &[usize],
        spacing: f64,
        cells: Vec<f64>,
        exterior: SetExterior,
    ) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::input(format!("set dimension {dim} unsupported (2 or 3)")));
        }
        if lower.len() != dim || counts.len() != dim {
            return Err(Error::input("box description does not match the dimension"));
        }
        if !(spacing.is_finite() && spacing > 0.0) || lower.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("spacing must be positive and box finite"));
        }
        let mut lo = [0.0; 3];
        let mut ct = [1usize; 3];
        lo[..dim].copy_from_slice(lower);
        ct[..dim].copy_from_slice(counts);
        let total: usize = ct.iter().product();
        if total == 0 || cells.len() != total {
            return Err(Error::input(format!("expected {total} cells, got {}", cells.len())));
        }
        if cells.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::input("indicator values must lie in [0, 1]"));
        }
        exterior.validate(dim)?;
        Ok(Self {
            dim,
            lower: lo,
            counts: ct,
            spacing,
            cells,
            exterior,
        })
    }

    /// Builds a grid by evaluating `f` at every cell center.
    pub fn from_fn(
        dim: usize,
        lower: &[f64],
        counts: &[usize],
        spacing: f64,
        exterior: SetExterior,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let total: usize = counts.iter().product();
        let mut ct = [1usize; 3];
        ct[..dim.min(counts.len())].copy_from_slice(&counts[..dim.min(counts.len())]);
        let mut cells = Vec::with_capacity(total);
        for idx in 0..total {
            let c = center_of(dim, lower, &ct, spacing, idx);
            cells.push(f(&c[..dim]));
        }
        Self::new(dim, lower, counts, spacing, cells, exterior)
    }

    /// Symmetric box `[-half_width, half_width]^dim`.
    pub fn centered(
        dim: usize,
        half_width: f64,
        spacing: f64,
        exterior: SetExterior,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let m = (2.0 * half_width / spacing).round() as usize;
        let lower = vec![-half_width; dim];
        let counts = vec![m; dim];
        Self::from_fn(dim, &lower, &counts, spacing, exterior, f)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    #[inline]
    pub fn cells(&self) -> &[f64] {
        &self.cells
    }
    #[inline]
    pub fn exterior(&self) -> &SetExterior {
        &self.exterior
    }
    pub fn lower(&self) -> &[f64] {
        &self.lower[..self.dim]
    }
    pub fn counts(&self) -> &[usize] {
        &self.counts[..self.dim]
    }
    pub fn upper(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|a| self.lower[a] + self.counts[a] as f64 * self.spacing)
            .collect()
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.cells.len()
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn with_cells(&self, cells: Vec<f64>) -> Result<Self> {
        Self::new(self.dim, self.lower(), self.counts(), self.spacing, cells, self.exterior.clone())
    }

    pub fn is_sharp(&self) -> bool {
        self.cells.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    #[inline]
    pub fn flat_index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.counts[1] + j) * self.counts[0] + i
    }

    #[inline]
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let i = idx % self.counts[0];
        let r = idx / self.counts[0];
        [i, r % self.counts[1], r / self.counts[1]]
    }

    pub fn cell_center(&self, idx: usize) -> Vec<f64> {
        center_of(self.dim, &self.lower[..self.dim], &self.counts, self.spacing, idx)[..self.dim].to_vec()
    }

    /// Coordinates of the lattice cell with signed multi-index.
    #[inline]
    pub fn lattice_center(&self, mi: [i64; 3]) -> [f64; 3] {
        let mut p = [0.0; 3];
        for a in 0..self.dim {
            p[a] = self.lower[a] + (mi[a] as f64 + 0.5) * self.spacing;
        }
        p
    }

    /// Value on the infinite lattice: stored cell inside, exterior rule at the
    /// cell center outside.
    #[inline]
    pub fn lattice_value(&self, mi: [i64; 3]) -> f64 {
        if (0..self.dim).all(|a| mi[a] >= 0 && (mi[a] as usize) < self.counts[a]) {
            self.cells[self.flat_index(mi[0] as usize, mi[1] as usize, mi[2] as usize)]
        } else {
            let p = self.lattice_center(mi);
            self.exterior.eval(&p[..self.dim])
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        (0..self.dim).all(|a| {
            x[a] >= self.lower[a] && x[a] <= self.lower[a] + self.counts[a] as f64 * self.spacing
        })
    }

    /// Nearest-cell value inside the box, exterior rule outside.
    pub fn indicator_at(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("point must be finite with matching dimension"));
        }
        if !self.contains(x) {
            return Ok(self.exterior.eval(x));
        }
        let mut mi = [0usize; 3];
        for a in 0..self.dim {
            let t = ((x[a] - self.lower[a]) / self.spacing).floor() as i64;
            mi[a] = t.clamp(0, self.counts[a] as i64 - 1) as usize;
        }
        Ok(self.cells[self.flat_index(mi[0], mi[1], mi[2])])
    }

    /// Complement set: cells `1 - theta`, exterior swapped to its complement rule.
    pub fn complement(&self) -> Self {
        Self {
            dim: self.dim,
            lower: self.lower,
            counts: self.counts,
            spacing: self.spacing,
            cells: self.cells.iter().map(|v| 1.0 - v).collect(),
            exterior: self.exterior.complement(),
        }
    }

    /// Cellwise union (max) with a grid on the same lattice.
    pub fn union(&self, other: &IndicatorGrid) -> Result<Self> {
        self.check_compatible(other)?;
        let cells = self.cells.iter().zip(&other.cells).map(|(a, b)| a.max(*b)).collect();
        self.with_cells(cells)
    }

    pub fn check_compatible(&self, other: &IndicatorGrid) -> Result<()> {
        let same = self.dim == other.dim
            && self.counts == other.counts
            && (self.spacing - other.spacing).abs() <= 1e-12 * self.spacing
            && (0..self.dim).all(|a| (self.lower[a] - other.lower[a]).abs() <= 1e-12 * self.spacing.max(1.0));
        if same {
            Ok(())
        } else {
            Err(Error::input("indicator grids are not on the same lattice"))
        }
    }

    /// Subgraph `{x_n < u(x')}` of a graph on the box `[-R,R]^{n-1} x [z_lo, z_lo + nz h]`.
    /// Cells are classified by their centers; the exterior is the half-space
    /// below the graph's far-field plane.
    pub fn subgraph(u: &GraphFunction, z_lo: f64, nz: usize) -> Result<Self> {
        let d = u.dim();
        let h = u.spacing();
        let m = u.axis_len();
        let plane = u
            .exterior()
            .far_plane(d)
            .ok_or_else(|| Error::UnsupportedExterior("subgraph needs a far-field plane".into()))?;
        let mut normal: Vec<f64> = plane.slope.iter().map(|a| -a).collect();
        normal.push(1.0);
        let exterior = SetExterior::half_space(&normal, plane.offset)?;
        let mut lower = vec![-u.radius(); d];
        lower.push(z_lo);
        let mut counts = vec![m; d];
        counts.push(nz);
        let base_len = u.len();
        let mut cells = vec![0.0; base_len * nz];
        for k in 0..nz {
            let z = z_lo + (k as f64 + 0.5) * h;
            for b in 0..base_len {
                if z < u.values()[b] {
                    cells[k * base_len + b] = 1.0;
                }
            }
        }
        Self::new(d + 1, &lower, &counts, h, cells, exterior)
    }

    /// Height function recovered column by column: `z_lo + h * (sum of column)`.
    pub fn column_heights(&self) -> Vec<f64> {
        let nz = self.counts[self.dim - 1];
        let base_len = self.cells.len() / nz;
        let z_lo = self.lower[self.dim - 1];
        (0..base_len)
            .map(|b| z_lo + self.spacing * (0..nz).map(|k| self.cells[k * base_len + b]).sum::<f64>())
            .collect()
    }

    /// Cells with value >= 1/2 having a face neighbor (inside the lattice,
    /// exterior included) with value < 1/2.
    pub fn boundary_cells(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for idx in 0..self.cells.len() {
            if self.cells[idx] < 0.5 {
                continue;
            }
            let mi = self.multi_index(idx);
            let base = [mi[0] as i64, mi[1] as i64, mi[2] as i64];
            let mut boundary = false;
            for a in 0..self.dim {
                for step in [-1i64, 1] {
                    let mut nb = base;
                    nb[a] += step;
                    if self.lattice_value(nb) < 0.5 {
                        boundary = true;
                    }
                }
            }
            if boundary {
                out.push(idx);
            }
        }
        out
    }
}

fn center_of(dim: usize, lower: &[f64], counts: &[usize; 3], h: f64, idx: usize) -> [f64; 3] {
    let mut p = [0.0; 3];
    let mut rem = idx;
    for a in 0..dim {
        let i = rem % counts[a];
        rem /= counts[a];
        p[a] = lower[a] + (i as f64 + 0.5) * h;
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::graph::ExteriorSpec;

    fn p0() -> SetExterior {
        SetExterior::half_space(&[0.0, 1.0], 0.0).unwrap()
    }

    #[test]
    fn half_space_exterior_membership() {
        let e = IndicatorGrid::centered(2, 1.0, 0.25, p0(), |x| if x[1] < 0.0 { 1.0 } else { 0.0 }).unwrap();
        assert_eq!(e.indicator_at(&[0.0, -5.0]).unwrap(), 1.0);
        assert_eq!(e.indicator_at(&[0.0, 5.0]).unwrap(), 0.0);
        assert_eq!(e.indicator_at(&[0.125, -0.125]).unwrap(), 1.0);
        assert!(e.is_sharp());
    }

    #[test]
    fn complement_is_involution() {
        let e = IndicatorGrid::centered(2, 1.0, 0.25, p0(), |x| (x[0] * x[0]).min(1.0)).unwrap();
        assert!(!e.is_sharp());
        let cc = e.complement().complement();
        assert_eq!(cc.cells(), e.cells());
        assert_eq!(cc.exterior(), e.exterior());
        match e.complement().exterior() {
            SetExterior::HalfSpace { normal, offset } => {
                assert_eq!(normal, &vec![0.0, -1.0]);
                assert_eq!(*offset, 0.0);
            }
            _ => panic!("expected half-space"),
        }
    }

    #[test]
    fn rejects_out_of_range_cells() {
        assert!(IndicatorGrid::new(2, &[0.0, 0.0], &[1, 1], 1.0, vec![1.5], SetExterior::Full).is_err());
        assert!(IndicatorGrid::new(
            2,
            &[0.0, 0.0],
            &[1, 1],
            1.0,
            vec![1.0],
            SetExterior::HalfSpace { normal: vec![0.0, 2.0], offset: 0.0 }
        )
        .is_err());
    }

    #[test]
    fn subgraph_heights_within_h() {
        let u = GraphFunction::from_fn(1, 1.0, 1.0 / 32.0, ExteriorSpec::Zero, |x| 0.3 * (3.0 * x[0]).sin()).unwrap();
        let e = IndicatorGrid::subgraph(&u, -1.0, 64).unwrap();
        let heights = e.column_heights();
        for (a, b) in heights.iter().zip(u.values()) {
            assert!((a - b).abs() <= u.spacing() + 1e-12);
        }
    }
}
