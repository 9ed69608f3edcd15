use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Affine function `x -> slope . x + offset` on the base space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub slope: Vec<f64>,
    pub offset: f64,
}

impl Plane {
    pub fn flat(dim: usize, offset: f64) -> Self {
        Self {
            slope: vec![0.0; dim],
            offset,
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.slope.iter().zip(x).map(|(a, x)| a * x).sum::<f64>() + self.offset
    }
}

/// Samples of a function on a coarse cell-centered grid, used as exterior datum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseSamples {
    pub radius: f64,
    pub spacing: f64,
    pub values: Vec<f64>,
    /// Plane used beyond `radius`; required by the far-field formulas.
    pub tail: Option<Plane>,
}

/// Values taken by a graph function outside its domain box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExteriorSpec {
    Zero,
    Plane(Plane),
    Samples(CoarseSamples),
    /// Exterior given by continuing the obstacle, sampled on a larger box.
    ObstacleContinuation(CoarseSamples),
}

impl ExteriorSpec {
    pub fn plane(slope: Vec<f64>, offset: f64) -> Self {
        ExteriorSpec::Plane(Plane { slope, offset })
    }

    pub fn flat(dim: usize, offset: f64) -> Self {
        ExteriorSpec::Plane(Plane::flat(dim, offset))
    }

    /// Plane describing the exterior at infinity, if one is declared.
    pub fn far_plane(&self, dim: usize) -> Option<Plane> {
        match self {
            ExteriorSpec::Zero => Some(Plane::flat(dim, 0.0)),
            ExteriorSpec::Plane(p) => Some(p.clone()),
            ExteriorSpec::Samples(c) | ExteriorSpec::ObstacleContinuation(c) => c.tail.clone(),
        }
    }

    /// True when the exterior is exactly a plane everywhere (Zero or Plane).
    pub fn is_planar(&self) -> bool {
        matches!(self, ExteriorSpec::Zero | ExteriorSpec::Plane(_))
    }

    /// Exterior value at `x`. Total: sampled exteriors fall back to their tail
    /// (or to 0 when no tail is declared) beyond their outermost radius.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ExteriorSpec::Zero => 0.0,
            ExteriorSpec::Plane(p) => p.eval(x),
            ExteriorSpec::Samples(c) | ExteriorSpec::ObstacleContinuation(c) => {
                if x.iter().all(|v| v.abs() <= c.radius) {
                    let m = axis_count(c.radius, c.spacing);
                    let tail = |y: &[f64]| c.tail.as_ref().map_or(0.0, |p| p.eval(y));
                    interpolate(&c.values, x.len(), m, c.radius, c.spacing, x, &tail)
                } else {
                    c.tail.as_ref().map_or(0.0, |p| p.eval(x))
                }
            }
        }
    }

    fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ExteriorSpec::Zero => Ok(()),
            ExteriorSpec::Plane(p) => {
                if p.slope.len() != dim || !p.offset.is_finite() || p.slope.iter().any(|v| !v.is_finite()) {
                    return Err(Error::input("plane exterior has wrong dimension or non-finite data"));
                }
                Ok(())
            }
            ExteriorSpec::Samples(c) | ExteriorSpec::ObstacleContinuation(c) => {
                if !(c.radius.is_finite() && c.radius > 0.0 && c.spacing > 0.0) {
                    return Err(Error::input("sampled exterior needs a finite outer radius"));
                }
                let m = axis_count(c.radius, c.spacing);
                if c.values.len() != m.pow(dim as u32) {
                    return Err(Error::input("sampled exterior has the wrong number of values"));
                }
                if let Some(p) = &c.tail {
                    ExteriorSpec::Plane(p.clone()).validate(dim)?;
                }
                Ok(())
            }
        }
    }
}

pub(crate) fn axis_count(radius: f64, spacing: f64) -> usize {
    (2.0 * radius / spacing).round() as usize
}

/// Multilinear interpolation on a cell-centered grid over `[-radius, radius]^dim`.
/// Points between the outermost centers and the box edge use `ghost` at ghost centers.
fn interpolate(
    values: &[f64],
    dim: usize,
    m: usize,
    radius: f64,
    h: f64,
    x: &[f64],
    ghost: &dyn Fn(&[f64]) -> f64,
) -> f64 {
    let mut base = [0i64; 2];
    let mut frac = [0.0; 2];
    for a in 0..dim {
        let t = (x[a] + radius) / h - 0.5;
        let f = t.floor();
        base[a] = f as i64;
        frac[a] = t - f;
    }
    let sample = |idx: &[i64; 2]| -> f64 {
        let inside = (0..dim).all(|a| idx[a] >= 0 && (idx[a] as usize) < m);
        if inside {
            let flat = if dim == 1 {
                idx[0] as usize
            } else {
                idx[1] as usize * m + idx[0] as usize
            };
            values[flat]
        } else {
            let mut p = [0.0; 2];
            for a in 0..dim {
                p[a] = -radius + (idx[a] as f64 + 0.5) * h;
            }
            ghost(&p[..dim])
        }
    };
    if dim == 1 {
        let v0 = sample(&[base[0], 0]);
        let v1 = sample(&[base[0] + 1, 0]);
        v0 + frac[0] * (v1 - v0)
    } else {
        let v00 = sample(&[base[0], base[1]]);
        let v10 = sample(&[base[0] + 1, base[1]]);
        let v01 = sample(&[base[0], base[1] + 1]);
        let v11 = sample(&[base[0] + 1, base[1] + 1]);
        let (fx, fy) = (frac[0], frac[1]);
        (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11)
    }
}

/// Discretized graph `u : [-R, R]^dim -> R` sampled at cell centers,
/// with prescribed values outside the box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFunction {
    dim: usize,
    radius: f64,
    spacing: f64,
    values: Vec<f64>,
    exterior: ExteriorSpec,
}

impl GraphFunction {
    pub fn new(dim: usize, radius: f64, spacing: f64, values: Vec<f64>, exterior: ExteriorSpec) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::input(format!("graph base dimension {dim} unsupported (1 or 2)")));
        }
        if !(radius.is_finite() && radius > 0.0 && spacing.is_finite() && spacing > 0.0) {
            return Err(Error::input("radius and spacing must be positive and finite"));
        }
        let m = axis_count(radius, spacing);
        if m == 0 || ((m as f64) * spacing - 2.0 * radius).abs() > 1e-9 * radius {
            return Err(Error::input(format!(
                "spacing {spacing} does not divide the box width {}",
                2.0 * radius
            )));
        }
        if values.len() != m.pow(dim as u32) {
            return Err(Error::input(format!(
                "expected {} samples, got {}",
                m.pow(dim as u32),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("graph samples must be finite"));
        }
        exterior.validate(dim)?;
        Ok(Self {
            dim,
            radius,
            spacing,
            values,
            exterior,
        })
    }

    /// Samples `f` at every cell center.
    pub fn from_fn(
        dim: usize,
        radius: f64,
        spacing: f64,
        exterior: ExteriorSpec,
        f: impl Fn(&[f64]) -> f64,
    ) -> Result<Self> {
        let m = axis_count(radius, spacing);
        let len = m.pow(dim as u32);
        let mut values = Vec::with_capacity(len);
        let mut p = vec![0.0; dim];
        for idx in 0..len {
            Self::fill_center(dim, m, radius, spacing, idx, &mut p);
            values.push(f(&p));
        }
        Self::new(dim, radius, spacing, values, exterior)
    }

    fn fill_center(dim: usize, m: usize, radius: f64, h: f64, idx: usize, out: &mut [f64]) {
        let mut rem = idx;
        for o in out.iter_mut().take(dim) {
            let i = rem % m;
            rem /= m;
            *o = -radius + (i as f64 + 0.5) * h;
        }
    }

    /// Same grid and exterior, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.dim, self.radius, self.spacing, values, self.exterior.clone())
    }

    pub fn with_exterior(&self, exterior: ExteriorSpec) -> Result<Self> {
        Self::new(self.dim, self.radius, self.spacing, self.values.clone(), exterior)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    pub fn radius(&self) -> f64 {
        self.radius
    }
    #[inline]
    pub fn spacing(&self) -> f64 {
        self.spacing
    }
    #[inline]
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    #[inline]
    pub fn exterior(&self) -> &ExteriorSpec {
        &self.exterior
    }
    /// Cells per axis.
    #[inline]
    pub fn axis_len(&self) -> usize {
        axis_count(self.radius, self.spacing)
    }
    #[inline]
    pub fn len(&self) -> usize {
        self.values.len()
    }
    #[inline]
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Integer multi-index of flat index `idx` (x-axis fastest).
    #[inline]
    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        let m = self.axis_len();
        if self.dim == 1 {
            [idx, 0]
        } else {
            [idx % m, idx / m]
        }
    }

    #[inline]
    pub fn flat_index(&self, mi: [usize; 2]) -> usize {
        if self.dim == 1 {
            mi[0]
        } else {
            mi[1] * self.axis_len() + mi[0]
        }
    }

    /// Cell-center coordinates of flat index `idx`.
    pub fn center(&self, idx: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim];
        Self::fill_center(self.dim, self.axis_len(), self.radius, self.spacing, idx, &mut p);
        p
    }

    /// Value at the lattice point with signed integer multi-index; cells
    /// outside the box take the exterior value at their center.
    #[inline]
    pub fn lattice_value(&self, i: i64, j: i64) -> f64 {
        let m = self.axis_len() as i64;
        let inside = i >= 0 && i < m && (self.dim == 1 || (j >= 0 && j < m));
        if inside {
            let flat = if self.dim == 1 { i as usize } else { (j * m + i) as usize };
            self.values[flat]
        } else {
            let h = self.spacing;
            let x = -self.radius + (i as f64 + 0.5) * h;
            if self.dim == 1 {
                self.exterior.eval(&[x])
            } else {
                let y = -self.radius + (j as f64 + 0.5) * h;
                self.exterior.eval(&[x, y])
            }
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.abs() <= self.radius)
    }

    /// Multilinear interpolation inside the box, exterior value outside.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("evaluation point must be finite with matching dimension"));
        }
        if !self.contains(x) {
            return Ok(self.exterior.eval(x));
        }
        let m = self.axis_len();
        let ext = |y: &[f64]| self.exterior.eval(y);
        Ok(interpolate(&self.values, self.dim, m, self.radius, self.spacing, x, &ext))
    }

    /// Largest absolute one-sided difference quotient over all cell faces,
    /// including the faces to the exterior ghost cells.
    pub fn max_slope(&self) -> f64 {
        let m = self.axis_len() as i64;
        let h = self.spacing;
        let mut best: f64 = 0.0;
        let jr = if self.dim == 1 { 0..1 } else { 0..m };
        for j in jr {
            for i in -1..m {
                let d = (self.lattice_value(i + 1, j) - self.lattice_value(i, j)).abs() / h;
                best = best.max(d);
            }
        }
        if self.dim == 2 {
            for i in 0..m {
                for j in -1..m {
                    let d = (self.lattice_value(i, j + 1) - self.lattice_value(i, j)).abs() / h;
                    best = best.max(d);
                }
            }
        }
        best
    }

    /// Integral over the box by the midpoint rule.
    pub fn integrate(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing.powi(self.dim as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_inside_and_zero_outside() {
        let g = GraphFunction::from_fn(1, 1.0, 0.125, ExteriorSpec::Zero, |_| 3.5).unwrap();
        assert_eq!(g.evaluate(&[0.3]).unwrap(), 3.5);
        assert_eq!(g.evaluate(&[2.0]).unwrap(), 0.0);
    }

    #[test]
    fn plane_exterior_outside() {
        let g = GraphFunction::from_fn(2, 1.0, 0.25, ExteriorSpec::plane(vec![0.5, -2.0], 1.0), |_| 0.0).unwrap();
        let v = g.evaluate(&[3.0, 1.5]).unwrap();
        assert!((v - (1.5 - 3.0 + 1.0)).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(GraphFunction::new(1, 1.0, 0.3, vec![0.0; 7], ExteriorSpec::Zero).is_err());
        assert!(GraphFunction::new(3, 1.0, 0.5, vec![0.0; 64], ExteriorSpec::Zero).is_err());
        assert!(GraphFunction::new(1, 1.0, 0.5, vec![0.0, f64::NAN, 0.0, 0.0], ExteriorSpec::Zero).is_err());
        assert!(GraphFunction::new(1, 1.0, 0.5, vec![0.0; 4], ExteriorSpec::Zero)
            .unwrap()
            .evaluate(&[f64::INFINITY])
            .is_err());
    }

    #[test]
    fn continuous_across_box_edge() {
        let plane = ExteriorSpec::plane(vec![0.7], 0.2);
        let g = GraphFunction::from_fn(1, 1.0, 1.0 / 16.0, plane, |x| 0.7 * x[0] + 0.2).unwrap();
        let a = g.evaluate(&[1.0 - 1e-12]).unwrap();
        let b = g.evaluate(&[1.0 + 1e-12]).unwrap();
        assert!((a - b).abs() < 1e-10);
    }
}
