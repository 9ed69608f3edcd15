use rayon::prelude::*;

use super::KernelSpec;
use crate::domain::{IndicatorGrid, SetExterior};
use crate::error::{Error, Result};
use crate::quad::{gl, radial_mass, sphere_integral};

#[derive(Debug, Clone, Copy)]
enum Region {
    All,
    Inside(f64),
    Outside(f64),
}

impl Region {
    fn window(self) -> (f64, f64) {
        match self {
            Region::All => (0.0, f64::INFINITY),
            Region::Inside(r) => (0.0, r),
            Region::Outside(r) => (r, f64::INFINITY),
        }
    }
}

/// Evaluator for `int (chi_E - chi_{CE})(y) |y - x|^{-(n+2s)} dy` and its truncations.
///
/// Boundary evaluation points are moved to the nearest midpoint of a face
/// separating a cell of the set from a cell of its complement; other points
/// are snapped to the half-lattice. Either way the point reflection through
/// them maps cells onto cells. Cells whose closure contains the point are left
/// out, which realizes the principal value.
#[derive(Debug, Clone)]
pub struct SetEvaluator {
    spec: KernelSpec,
}

impl SetEvaluator {
    pub fn new(spec: &KernelSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec: spec.clone() })
    }

    fn exponent(&self, n: usize) -> f64 {
        self.spec.order.kernel_exponent(n)
    }

    /// Nearest point of the half-lattice `lower + (h/2) Z^n`.
    pub fn snap(e: &IndicatorGrid, x: &[f64]) -> Vec<f64> {
        let half = 0.5 * e.spacing();
        x.iter()
            .zip(e.lower())
            .map(|(v, lo)| lo + ((v - lo) / half).round() * half)
            .collect()
    }

    /// Midpoint of the interface face nearest to `x`, within `2h`.
    pub fn boundary_point(e: &IndicatorGrid, x: &[f64]) -> Result<Vec<f64>> {
        let h = e.spacing();
        let n = e.dim();
        let mut base = [0i64; 3];
        for a in 0..n {
            base[a] = ((x[a] - e.lower()[a]) / h).floor() as i64;
        }
        let r = 3i64;
        let kr = if n == 3 { -r..=r } else { 0..=0 };
        let mut best: Option<(f64, [f64; 3])> = None;
        for dk in kr {
            for dj in -r..=r {
                for di in -r..=r {
                    let mi = [base[0] + di, base[1] + dj, base[2] + dk];
                    let inside = e.lattice_value(mi) >= 0.5;
                    for a in 0..n {
                        let mut nb = mi;
                        nb[a] += 1;
                        if (e.lattice_value(nb) >= 0.5) == inside {
                            continue;
                        }
                        let mut m = e.lattice_center(mi);
                        m[a] += 0.5 * h;
                        let d2: f64 = (0..n).map(|b| (m[b] - x[b]).powi(2)).sum();
                        if best.is_none_or(|(bd, _)| d2 < bd - 1e-12 * h * h) {
                            best = Some((d2, m));
                        }
                    }
                }
            }
        }
        match best {
            Some((d2, m)) if d2 <= 4.0 * h * h * (1.0 + 1e-12) => Ok(m[..n].to_vec()),
            _ => Err(Error::NotABoundaryPoint(x.to_vec())),
        }
    }

    /// Fractional curvature of `e` at the boundary point `x`.
    pub fn curvature(&self, e: &IndicatorGrid, x: &[f64]) -> Result<f64> {
        let x0 = self.prepare(e, x, true)?;
        Ok(self.evaluate(e, &x0, Region::All, true))
    }

    /// Contribution of the ball `B_r(x)` to the fractional curvature.
    pub fn truncated_curvature(&self, e: &IndicatorGrid, x: &[f64], r: f64) -> Result<f64> {
        if !(r > 2.0 * e.spacing()) {
            return Err(Error::Resolution(format!("truncation radius {r} not above 2h")));
        }
        let x0 = self.prepare(e, x, true)?;
        Ok(self.evaluate(e, &x0, Region::Inside(r), true))
    }

    /// `f_E(y) = int_{|x - y| > T} (chi_{CE} - chi_E) |x - y|^{-(n+2s)} dx`.
    #[allow(non_snake_case)]
    pub fn truncated_kernel_fE(&self, e: &IndicatorGrid, y: &[f64]) -> Result<f64> {
        let t = self
            .spec
            .truncation_radius
            .ok_or_else(|| Error::Config("f_E needs a truncation radius".into()))?;
        let y0 = self.prepare(e, y, false)?;
        Ok(-self.evaluate(e, &y0, Region::Outside(t), false))
    }

    fn prepare(&self, e: &IndicatorGrid, x: &[f64], boundary: bool) -> Result<Vec<f64>> {
        self.spec.check_spacing(e.spacing())?;
        if x.len() != e.dim() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("evaluation point must be finite with matching dimension"));
        }
        if !e.is_sharp() {
            return Err(Error::RequiresSharp);
        }
        let x0 = if boundary {
            Self::boundary_point(e, x)?
        } else {
            Self::snap(e, x)
        };
        if !e.contains(&x0) {
            return Err(Error::input("evaluation point must lie in the grid box"));
        }
        Ok(x0)
    }

    fn evaluate(&self, e: &IndicatorGrid, x0: &[f64], region: Region, exclude_touching: bool) -> f64 {
        let cells = self.cell_sum(e, x0, region, exclude_touching);
        cells + self.exterior(e, x0, region)
    }

    fn cell_sum(&self, e: &IndicatorGrid, x0: &[f64], region: Region, exclude: bool) -> f64 {
        let n = e.dim();
        let h = e.spacing();
        let p = self.exponent(n);
        let counts = e.counts();
        let rows = e.len() / counts[0];
        let row_sums: Vec<f64> = (0..rows)
            .into_par_iter()
            .map(|row| {
                let mut acc = 0.0;
                for i in 0..counts[0] {
                    let idx = row * counts[0] + i;
                    let theta = e.cells()[idx];
                    let sign = 2.0 * theta - 1.0;
                    if sign == 0.0 {
                        continue;
                    }
                    let c = e.cell_center(idx);
                    let nu = cell_weight(&c, x0, h, p, region, exclude);
                    acc += sign * nu;
                }
                acc
            })
            .collect();
        row_sums.iter().sum()
    }

    fn exterior(&self, e: &IndicatorGrid, x0: &[f64], region: Region) -> f64 {
        let n = e.dim();
        let s = self.spec.order.s();
        let (lo, hi) = region.window();
        let lower = e.lower().to_vec();
        let upper = e.upper();
        let far = self.spec.far_field_radius;
        let f = |w: &[f64]| -> f64 {
            let rb = ray_exit(x0, w, &lower, &upper);
            let a = rb.max(lo);
            if a >= hi {
                return 0.0;
            }
            ray_integral(e.exterior(), x0, w, a, hi, s, far)
        };
        let tol = if n == 2 { 1e-11 } else { 1e-9 };
        sphere_integral(n, &f, tol)
    }
}

/// Distance from `x` (inside the box) to the box boundary along `w`.
pub(crate) fn ray_exit(x: &[f64], w: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    let mut t = f64::INFINITY;
    for a in 0..x.len() {
        if w[a] > 0.0 {
            t = t.min((upper[a] - x[a]) / w[a]);
        } else if w[a] < 0.0 {
            t = t.min((lower[a] - x[a]) / w[a]);
        }
    }
    t.max(0.0)
}

/// `int_a^b (2 chi(x + r w) - 1) r^{-1-2s} dr` for the exterior rule `rule`.
pub(crate) fn ray_integral(rule: &SetExterior, x: &[f64], w: &[f64], a: f64, b: f64, s: f64, far: f64) -> f64 {
    match rule {
        SetExterior::Full => radial_mass(a, b, s),
        SetExterior::Complement => -radial_mass(a, b, s),
        SetExterior::HalfSpace { normal, offset } => {
            let g0: f64 = normal.iter().zip(x).map(|(n, v)| n * v).sum::<f64>() - offset;
            let gw: f64 = normal.iter().zip(w).map(|(n, v)| n * v).sum();
            let sign_at = |r: f64| if g0 + r * gw < 0.0 { 1.0 } else { -1.0 };
            let cross = if gw != 0.0 { -g0 / gw } else { f64::NAN };
            if cross.is_finite() && cross > a && cross < b {
                sign_at(0.5 * (a + cross)) * radial_mass(a, cross, s)
                    + sign_at(if b.is_finite() { 0.5 * (cross + b) } else { cross + 1.0 }) * radial_mass(cross, b, s)
            } else {
                let mid = if b.is_finite() { 0.5 * (a + b) } else { a + 1.0 };
                sign_at(mid) * radial_mass(a, b, s)
            }
        }
        SetExterior::Custom(g) => {
            let lower = g.lower().to_vec();
            let upper = g.upper();
            let inside_box = (0..x.len()).all(|k| x[k] + a * w[k] >= lower[k] && x[k] + a * w[k] <= upper[k]);
            let exit = if inside_box {
                let p: Vec<f64> = (0..x.len()).map(|k| x[k] + a * w[k]).collect();
                a + ray_exit(&p, w, &lower, &upper)
            } else {
                a
            };
            let stop = exit.min(b).min(far.max(a));
            let mut acc = 0.0;
            if stop > a {
                let step = 0.25 * g.spacing();
                let pieces = ((stop - a) / step).ceil().max(1.0) as usize;
                let dr = (stop - a) / pieces as f64;
                let mut pt = vec![0.0; x.len()];
                for k in 0..pieces {
                    let r0 = a + k as f64 * dr;
                    let r1 = if k + 1 == pieces { stop } else { r0 + dr };
                    let rm = 0.5 * (r0 + r1);
                    for c in 0..x.len() {
                        pt[c] = x[c] + rm * w[c];
                    }
                    let chi = g.indicator_at(&pt).unwrap_or(0.0);
                    acc += (2.0 * chi - 1.0) * radial_mass(r0, r1, s);
                }
            }
            if stop < b {
                acc += ray_integral(g.exterior(), x, w, stop, b, s, far);
            }
            acc
        }
    }
}

/// `int_cell |y - x0|^{-p} dy` restricted to the region, with the quadrature
/// refined near `x0` and across the region's sphere.
fn cell_weight(c: &[f64], x0: &[f64], h: f64, p: f64, region: Region, exclude: bool) -> f64 {
    let n = c.len();
    let half = 0.5 * h;
    let mut dmin2 = 0.0;
    let mut dmax2 = 0.0;
    let mut touching = true;
    for a in 0..n {
        let d = (c[a] - x0[a]).abs();
        if d > half * (1.0 + 1e-9) {
            touching = false;
        }
        dmin2 += (d - half).max(0.0).powi(2);
        dmax2 += (d + half).powi(2);
    }
    if touching {
        if exclude {
            return 0.0;
        }
    }
    let (dmin, dmax) = (dmin2.sqrt(), dmax2.sqrt());
    let (lo, hi) = region.window();
    if dmax <= lo || dmin >= hi {
        return 0.0;
    }
    let straddles = (lo > 0.0 && dmin < lo) || (hi.is_finite() && dmax > hi);
    let (sub, pts): (usize, usize) = if touching {
        (8, 6)
    } else if dmin < 2.0 * h || straddles {
        (4, 4)
    } else if dmin < 6.0 * h {
        (1, 4)
    } else {
        (1, 2)
    };
    let (gx, gw) = gl(pts);
    let sh = h / sub as f64;
    let mut acc = 0.0;
    let mut y = [0.0; 3];
    let total_sub = sub.pow(n as u32);
    let total_pts = pts.pow(n as u32);
    for sc in 0..total_sub {
        let mut rem = sc;
        let mut corner = [0.0; 3];
        for a in 0..n {
            corner[a] = c[a] - half + (rem % sub) as f64 * sh + 0.5 * sh;
            rem /= sub;
        }
        for q in 0..total_pts {
            let mut rq = q;
            let mut wt = 1.0;
            for a in 0..n {
                let k = rq % pts;
                rq /= pts;
                y[a] = corner[a] + 0.5 * sh * gx[k];
                wt *= gw[k];
            }
            let r2: f64 = (0..n).map(|a| (y[a] - x0[a]).powi(2)).sum();
            let r = r2.sqrt();
            if r < lo || r >= hi {
                continue;
            }
            acc += wt * r2.powf(-0.5 * p);
        }
    }
    acc * (0.5 * sh).powi(n as i32)
}

/// Fractional curvature of the sharp set `e` at the boundary point `x`.
pub fn fractional_curvature_set(e: &IndicatorGrid, spec: &KernelSpec, x: &[f64]) -> Result<f64> {
    SetEvaluator::new(spec)?.curvature(e, x)
}

/// Contribution of `B_r(x)` to the fractional curvature of `e` at `x`.
pub fn truncated_curvature(e: &IndicatorGrid, spec: &KernelSpec, x: &[f64], r: f64) -> Result<f64> {
    SetEvaluator::new(spec)?.truncated_curvature(e, x, r)
}

/// Curvature contribution from outside the truncation ball, with the sign of `f_E`.
#[allow(non_snake_case)]
pub fn truncated_kernel_fE(e: &IndicatorGrid, spec: &KernelSpec, y: &[f64]) -> Result<f64> {
    SetEvaluator::new(spec)?.truncated_kernel_fE(e, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::FractionalOrder;

    fn spec(s: f64, h: f64) -> KernelSpec {
        KernelSpec::new(FractionalOrder::new(s).unwrap(), h).unwrap()
    }

    fn lower_half(h: f64) -> IndicatorGrid {
        let ext = SetExterior::half_space(&[0.0, 1.0], 0.0).unwrap();
        IndicatorGrid::centered(2, 1.0, h, ext, |x| if x[1] < 0.0 { 1.0 } else { 0.0 }).unwrap()
    }

    #[test]
    fn half_space_has_zero_curvature() {
        let h = 1.0 / 32.0;
        let e = lower_half(h);
        let sp = spec(0.25, h);
        for x in [[0.0, 0.0], [0.37, 0.0], [-0.8, 0.0]] {
            let k = fractional_curvature_set(&e, &sp, &x).unwrap();
            assert!(k.abs() < 1e-3, "{x:?}: {k}");
        }
        assert!(truncated_kernel_fE(&e, &sp, &[0.2, 0.0]).unwrap().abs() < 1e-3);
    }

    #[test]
    fn far_point_is_rejected() {
        let h = 1.0 / 16.0;
        let e = lower_half(h);
        let sp = spec(0.25, h);
        assert!(matches!(
            fractional_curvature_set(&e, &sp, &[0.0, 0.5]),
            Err(Error::NotABoundaryPoint(_))
        ));
    }

    fn disc(h: f64) -> IndicatorGrid {
        IndicatorGrid::centered(2, 2.0, h, SetExterior::Complement, |x| {
            if x[0] * x[0] + x[1] * x[1] < 1.0 {
                1.0
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn disc_curvature_converges_to_closed_form() {
        let s: f64 = 0.25;
        let beta = statrs::function::beta::beta(0.5, 0.5 - s);
        let exact = -(2.0f64).powf(-2.0 * s) * beta / s;
        let coarse = fractional_curvature_set(&disc(1.0 / 32.0), &spec(s, 1.0 / 32.0), &[0.0, 1.0]).unwrap();
        let e = disc(1.0 / 64.0);
        let sp = spec(s, 1.0 / 64.0);
        let fine = fractional_curvature_set(&e, &sp, &[0.0, 1.0]).unwrap();
        assert!(fine < 0.0);
        assert!(((coarse - fine) / fine).abs() < 0.05, "{coarse} vs {fine}");
        assert!((fine - exact).abs() < (coarse - exact).abs());
        assert!(((fine - exact) / exact).abs() < 0.1, "{fine} vs {exact}");
        let kc = fractional_curvature_set(&e.complement(), &sp, &[0.0, 1.0]).unwrap();
        assert!((fine + kc).abs() < 1e-12 * fine.abs());
    }
}
