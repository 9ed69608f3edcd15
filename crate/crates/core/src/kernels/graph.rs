use std::f64::consts::PI;

use rayon::prelude::*;

use super::stencil::GraphStencil;
use super::KernelSpec;
use crate::domain::{ExteriorSpec, GraphFunction, Plane};
use crate::error::{Error, Result};
use crate::quad::gl;

/// Fractional Laplacian and graph curvature operators for one grid geometry.
///
/// The lattice is extended past the domain box far enough to hold any sampled
/// exterior data; beyond that box the function coincides with its far plane
/// and the remaining contributions are integrated along rays.
#[derive(Debug, Clone)]
pub struct GraphOperator {
    spec: KernelSpec,
    stencil: GraphStencil,
    plane: Plane,
    dim: usize,
    m: usize,
    pad: usize,
    radius: f64,
}

impl GraphOperator {
    pub fn new(spec: &KernelSpec, u: &GraphFunction) -> Result<Self> {
        spec.check_spacing(u.spacing())?;
        let dim = u.dim();
        let plane = u.exterior().far_plane(dim).ok_or_else(|| {
            Error::UnsupportedExterior("sampled exterior without a declared plane tail".into())
        })?;
        let h = u.spacing();
        let pad = match u.exterior() {
            ExteriorSpec::Samples(c) | ExteriorSpec::ObstacleContinuation(c) if c.radius > u.radius() => {
                ((c.radius - u.radius()) / h - 1e-9).ceil() as usize
            }
            _ => 0,
        };
        let m = u.axis_len();
        let stencil = GraphStencil::new(spec, dim, m + 2 * pad)?;
        Ok(Self {
            spec: spec.clone(),
            stencil,
            plane,
            dim,
            m,
            pad,
            radius: u.radius(),
        })
    }

    pub fn stencil(&self) -> &GraphStencil {
        &self.stencil
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }

    /// Cells per axis of the extended lattice.
    fn ext_len(&self) -> usize {
        self.m + 2 * self.pad
    }

    fn check(&self, u: &GraphFunction) -> Result<()> {
        if u.dim() != self.dim || u.axis_len() != self.m || (u.radius() - self.radius).abs() > 1e-12 {
            return Err(Error::input("graph does not match the operator's grid"));
        }
        Ok(())
    }

    /// Values of `u` on the extended lattice, x fastest.
    fn extended_values(&self, u: &GraphFunction) -> Vec<f64> {
        let me = self.ext_len() as i64;
        let pad = self.pad as i64;
        let rows = if self.dim == 1 { 1 } else { me };
        let mut out = Vec::with_capacity((me * rows) as usize);
        for j in 0..rows {
            for i in 0..me {
                let jj = if self.dim == 1 { 0 } else { j - pad };
                out.push(u.lattice_value(i - pad, jj));
            }
        }
        out
    }

    fn ext_center(&self, ii: i64, jj: i64) -> [f64; 2] {
        let h = self.stencil.spacing();
        let lo = -self.radius - self.pad as f64 * h;
        [lo + (ii as f64 + 0.5) * h, lo + (jj as f64 + 0.5) * h]
    }

    fn plane_at(&self, x: &[f64; 2]) -> f64 {
        self.plane.eval(&x[..self.dim])
    }

    fn deviation(&self, ext: &[f64]) -> Vec<f64> {
        let me = self.ext_len() as i64;
        ext.iter()
            .enumerate()
            .map(|(idx, v)| {
                let idx = idx as i64;
                v - self.plane_at(&self.ext_center(idx % me, idx / me))
            })
            .collect()
    }

    fn ext_coords(&self, u: &GraphFunction, idx: usize) -> (i64, i64) {
        let mi = u.multi_index(idx);
        let pad = self.pad as i64;
        let jj = if self.dim == 1 { 0 } else { mi[1] as i64 + pad };
        (mi[0] as i64 + pad, jj)
    }

    fn laplacian_ext(&self, w: &[f64], ii: i64, jj: i64) -> f64 {
        let me = self.ext_len() as i64;
        let rows = if self.dim == 1 { 1 } else { me };
        let mut acc = 0.0;
        for j in 0..rows {
            let row = &w[(j * me) as usize..((j + 1) * me) as usize];
            for (i, wv) in row.iter().enumerate() {
                let i = i as i64;
                if i == ii && j == jj {
                    continue;
                }
                acc += self.stencil.weight([i - ii, j - jj]) * wv;
            }
        }
        acc - self.stencil.total_mass() * w[(jj * me + ii) as usize]
    }

    /// `int (u(x + z) - u(x)) |z|^{-(d+1+2s)} dz` at the cell `idx`.
    pub fn laplacian_at(&self, u: &GraphFunction, idx: usize) -> Result<f64> {
        self.check(u)?;
        if idx >= u.len() {
            return Err(Error::input("grid index out of range"));
        }
        let w = self.deviation(&self.extended_values(u));
        let (ii, jj) = self.ext_coords(u, idx);
        Ok(self.laplacian_ext(&w, ii, jj))
    }

    /// Fractional Laplacian at every cell of `u`.
    pub fn laplacian_all(&self, u: &GraphFunction) -> Result<Vec<f64>> {
        self.check(u)?;
        let w = self.deviation(&self.extended_values(u));
        Ok((0..u.len())
            .into_par_iter()
            .map(|idx| {
                let (ii, jj) = self.ext_coords(u, idx);
                self.laplacian_ext(&w, ii, jj)
            })
            .collect())
    }

    /// Dense matrix `A` (row-major, domain cells only) with
    /// `L u = A (u - P) + b`, where `b` collects sampled exterior data.
    pub fn dense_matrix(&self) -> Vec<f64> {
        let n = self.m.pow(self.dim as u32);
        let m = self.m as i64;
        let mut a = vec![0.0; n * n];
        a.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
            let (ri, rj) = ((r as i64) % m, (r as i64) / m);
            for (c, entry) in row.iter_mut().enumerate() {
                let (ci, cj) = ((c as i64) % m, (c as i64) / m);
                *entry = if r == c {
                    -self.stencil.total_mass()
                } else {
                    self.stencil.weight([ci - ri, cj - rj])
                };
            }
        });
        a
    }

    /// Exterior contribution `b` of [`Self::dense_matrix`].
    pub fn exterior_forcing(&self, u: &GraphFunction) -> Result<Vec<f64>> {
        self.check(u)?;
        if self.pad == 0 {
            return Ok(vec![0.0; u.len()]);
        }
        let mut w = self.deviation(&self.extended_values(u));
        let me = self.ext_len() as i64;
        let pad = self.pad as i64;
        for (idx, v) in w.iter_mut().enumerate() {
            let (i, j) = (idx as i64 % me, idx as i64 / me);
            let inside = i >= pad && i < pad + self.m as i64 && (self.dim == 1 || (j >= pad && j < pad + self.m as i64));
            if inside {
                *v = 0.0;
            }
        }
        Ok((0..u.len())
            .into_par_iter()
            .map(|idx| {
                let (ii, jj) = self.ext_coords(u, idx);
                self.laplacian_ext(&w, ii, jj)
            })
            .collect())
    }

    /// Fractional curvature of the subgraph at `(x_idx, u(x_idx))`.
    pub fn curvature_at(&self, u: &GraphFunction, idx: usize) -> Result<f64> {
        self.check(u)?;
        self.check_slope(u)?;
        if idx >= u.len() {
            return Err(Error::input("grid index out of range"));
        }
        let ext = self.extended_values(u);
        let (ii, jj) = self.ext_coords(u, idx);
        Ok(self.curvature_ext(&ext, ii, jj))
    }

    /// Graph curvature at every cell of `u`.
    pub fn curvature_all(&self, u: &GraphFunction) -> Result<Vec<f64>> {
        self.check(u)?;
        self.check_slope(u)?;
        let ext = self.extended_values(u);
        Ok((0..u.len())
            .into_par_iter()
            .map(|idx| {
                let (ii, jj) = self.ext_coords(u, idx);
                self.curvature_ext(&ext, ii, jj)
            })
            .collect())
    }

    fn check_slope(&self, u: &GraphFunction) -> Result<()> {
        let slope = u.max_slope();
        if slope > self.spec.slope_cap {
            return Err(Error::SteepGraph {
                slope,
                cap: self.spec.slope_cap,
            });
        }
        Ok(())
    }

    fn curvature_ext(&self, ext: &[f64], ii: i64, jj: i64) -> f64 {
        let me = self.ext_len() as i64;
        let rows = if self.dim == 1 { 1 } else { me };
        let h = self.stencil.spacing();
        let col = self.stencil.column();
        let ui = ext[(jj * me + ii) as usize];
        let mut acc = 0.0;
        for j in 0..rows {
            let row = &ext[(j * me) as usize..((j + 1) * me) as usize];
            let dj = j - jj;
            for (i, uj) in row.iter().enumerate() {
                let di = i as i64 - ii;
                if di == 0 && dj == 0 {
                    continue;
                }
                let r = ((di * di + dj * dj) as f64).sqrt() * h;
                let tilt = self.tilt(di, dj, r);
                let w = self.base_weight([di, dj]);
                acc += 2.0 * w * r * (col.g((uj - ui) / r) - col.g(tilt));
            }
        }
        let value = |di: i64, dj: i64| -> f64 {
            let (i, j) = (ii + di, jj + dj);
            if i < 0 || i >= me || j < 0 || j >= rows {
                let x = self.ext_center(i, j);
                self.plane_at(&x)
            } else {
                ext[(j * me + i) as usize]
            }
        };
        let mut faces = 0.0;
        let axes: &[(i64, i64)] = if self.dim == 1 { &[(1, 0)] } else { &[(1, 0), (0, 1)] };
        for &(a, b) in axes {
            let (up, dn) = (value(a, b), value(-a, -b));
            faces += (col.g((up - ui) / h) - col.g((ui - dn) / h)) / h;
        }
        acc += self.stencil.self_moment() * faces;
        let x = self.ext_center(ii, jj);
        let e = self.plane_at(&x) - ui;
        acc + self.far_rays(&x, e)
    }

    fn base_weight(&self, k: [i64; 2]) -> f64 {
        let w = self.stencil.weight(k);
        if k[0].abs() + k[1].abs() == 1 {
            let h = self.stencil.spacing();
            w - 0.5 * self.stencil.self_moment() / (h * h)
        } else {
            w
        }
    }

    fn order_s(&self) -> f64 {
        0.5 * (self.stencil.exponent() - self.dim as f64 - 1.0)
    }

    /// `int_{outside box} 2 |z|^{1-p} [G(a.z/|z| + e/|z|) - G(a.z/|z|)] dz`.
    fn far_rays(&self, x: &[f64; 2], e: f64) -> f64 {
        if e == 0.0 {
            return 0.0;
        }
        let s = self.order_s();
        let col = self.stencil.column();
        let (gx, gw) = gl(20);
        self.ray_sum(x, |b, r0| {
            let w0 = r0.powf(-2.0 * s);
            let base = col.g(b);
            let mut acc = 0.0;
            for (xi, wi) in gx.iter().zip(gw) {
                let w = 0.5 * w0 * (1.0 + xi);
                acc += wi * (col.g(b + e * w.powf(0.5 / s)) - base);
            }
            acc * 0.5 * w0 / s
        })
    }

    /// Derivative of [`Self::far_rays`] with respect to `e`.
    fn far_rays_slope(&self, x: &[f64; 2], e: f64) -> f64 {
        let s = self.order_s();
        let col = self.stencil.column();
        let (gx, gw) = gl(20);
        self.ray_sum(x, |b, r0| {
            let v0 = 1.0 / r0;
            let mut acc = 0.0;
            for (xi, wi) in gx.iter().zip(gw) {
                let v = 0.5 * v0 * (1.0 + xi);
                acc += wi * 2.0 * v.powf(2.0 * s) * col.dg(b + e * v);
            }
            acc * 0.5 * v0
        })
    }

    /// Energy whose derivative in `u(x)` is minus [`Self::far_rays`]:
    /// `int 2 |z|^{2-p} [H(b + e/|z|) - H(b) - G(b) e/|z|] dz`.
    fn far_rays_energy(&self, x: &[f64; 2], e: f64) -> f64 {
        if e == 0.0 {
            return 0.0;
        }
        let s = self.order_s();
        let col = self.stencil.column();
        let (gx, gw) = gl(20);
        let k = 1.0 + 2.0 * s;
        self.ray_sum(x, |b, r0| {
            let t0 = r0.powf(-k);
            let (hb, gb) = (col.h(b), col.g(b));
            let mut acc = 0.0;
            for (xi, wi) in gx.iter().zip(gw) {
                let t = 0.5 * t0 * (1.0 + xi);
                let v = t.powf(1.0 / k);
                let bracket = col.h(b + e * v) - hb - gb * e * v;
                acc += wi * 2.0 * bracket / (v * v);
            }
            acc * 0.5 * t0 / k
        })
    }

    /// Sums `radial(a . w, r_box(w))` over the directions `w` of the base space.
    fn ray_sum(&self, x: &[f64; 2], radial: impl Fn(f64, f64) -> f64) -> f64 {
        let h = self.stencil.spacing();
        let half = self.radius + self.pad as f64 * h;
        if self.dim == 1 {
            let a = self.plane.slope[0];
            return radial(a, half - x[0]) + radial(-a, half + x[0]);
        }
        let (a0, a1) = (self.plane.slope[0], self.plane.slope[1]);
        let corners = [
            (half - x[1]).atan2(half - x[0]),
            (half - x[1]).atan2(-half - x[0]),
            (-half - x[1]).atan2(-half - x[0]) + 2.0 * PI,
            (-half - x[1]).atan2(half - x[0]) + 2.0 * PI,
        ];
        let (tx, tw) = gl(24);
        let mut total = 0.0;
        for arc in 0..4 {
            let t0 = corners[arc];
            let t1 = if arc == 3 { corners[0] + 2.0 * PI } else { corners[arc + 1] };
            let (c, hw) = (0.5 * (t0 + t1), 0.5 * (t1 - t0));
            let mut acc = 0.0;
            for (ti, wi) in tx.iter().zip(tw) {
                let t = c + hw * ti;
                let (sn, cs) = t.sin_cos();
                let rx = if cs > 0.0 {
                    (half - x[0]) / cs
                } else if cs < 0.0 {
                    (-half - x[0]) / cs
                } else {
                    f64::INFINITY
                };
                let ry = if sn > 0.0 {
                    (half - x[1]) / sn
                } else if sn < 0.0 {
                    (-half - x[1]) / sn
                } else {
                    f64::INFINITY
                };
                acc += wi * radial(a0 * cs + a1 * sn, rx.min(ry));
            }
            total += acc * hw;
        }
        total
    }

    fn is_domain(&self, i: i64, j: i64) -> bool {
        let (pad, m) = (self.pad as i64, self.m as i64);
        i >= pad && i < pad + m && (self.dim == 1 || (j >= pad && j < pad + m))
    }

    fn tilt(&self, di: i64, dj: i64, r: f64) -> f64 {
        let h = self.stencil.spacing();
        let slope = &self.plane.slope;
        if self.dim == 1 {
            slope[0] * di as f64 * h / r
        } else {
            (slope[0] * di as f64 + slope[1] * dj as f64) * h / r
        }
    }

    /// Graph s-perimeter whose gradient is `-h^d` times the graph curvature:
    /// column-integrated pair terms `2 omega |z|^2 H(a)`, the self-cell face
    /// terms, the frozen far field along rays and a linear term balancing the
    /// tilt of the far plane.
    pub fn s_perimeter_energy(&self, u: &GraphFunction) -> Result<f64> {
        self.check(u)?;
        let ext = self.extended_values(u);
        let me = self.ext_len() as i64;
        let rows = if self.dim == 1 { 1 } else { me };
        let h = self.stencil.spacing();
        let col = self.stencil.column();
        let c = self.stencil.self_moment();
        let cells: Vec<(i64, i64)> = (0..rows).flat_map(|j| (0..me).map(move |i| (i, j))).collect();
        let parts: Vec<f64> = cells
            .par_iter()
            .map(|&(ii, jj)| {
                if !self.is_domain(ii, jj) {
                    return 0.0;
                }
                let ui = ext[(jj * me + ii) as usize];
                let mut acc = 0.0;
                let mut tilt_sum = 0.0;
                for j in 0..rows {
                    for i in 0..me {
                        let (di, dj) = (i - ii, j - jj);
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let other = self.is_domain(i, j);
                        let r = ((di * di + dj * dj) as f64).sqrt() * h;
                        let w = self.base_weight([di, dj]);
                        let later = (j, i) > (jj, ii);
                        if later || !other {
                            acc += 2.0 * w * r * r * col.h((ext[(j * me + i) as usize] - ui) / r);
                        }
                        tilt_sum += 2.0 * w * r * col.g(self.tilt(di, dj, r));
                    }
                }
                let mut faces = 0.0;
                let axes: &[(i64, i64)] = if self.dim == 1 { &[(1, 0)] } else { &[(1, 0), (0, 1)] };
                for &(a, b) in axes {
                    let up = self.value_or_plane(&ext, ii + a, jj + b);
                    faces += col.h((up - ui) / h);
                    if !self.is_domain(ii - a, jj - b) {
                        let dn = self.value_or_plane(&ext, ii - a, jj - b);
                        faces += col.h((ui - dn) / h);
                    }
                }
                let x = self.ext_center(ii, jj);
                let e = self.plane_at(&x) - ui;
                acc += c * faces + ui * tilt_sum + self.far_rays_energy(&x, e);
                acc
            })
            .collect();
        Ok(parts.iter().sum::<f64>() * h.powi(self.dim as i32))
    }

    fn value_or_plane(&self, ext: &[f64], i: i64, j: i64) -> f64 {
        let me = self.ext_len() as i64;
        let rows = if self.dim == 1 { 1 } else { me };
        if i < 0 || i >= me || j < 0 || j >= rows {
            self.plane_at(&self.ext_center(i, j))
        } else {
            ext[(j * me + i) as usize]
        }
    }

    /// Dense Hessian (domain cells, row-major) of [`Self::s_perimeter_energy`].
    pub fn s_perimeter_hessian(&self, u: &GraphFunction) -> Result<Vec<f64>> {
        self.check(u)?;
        let ext = self.extended_values(u);
        let me = self.ext_len() as i64;
        let rows = if self.dim == 1 { 1 } else { me };
        let h = self.stencil.spacing();
        let col = self.stencil.column();
        let c = self.stencil.self_moment();
        let n = u.len();
        let scale = h.powi(self.dim as i32);
        let mut hess = vec![0.0; n * n];
        hess.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
            let (ii, jj) = self.ext_coords(u, r);
            let ui = ext[(jj * me + ii) as usize];
            let mut diag = 0.0;
            for j in 0..rows {
                for i in 0..me {
                    let (di, dj) = (i - ii, j - jj);
                    if di == 0 && dj == 0 {
                        continue;
                    }
                    let d = ((di * di + dj * dj) as f64).sqrt() * h;
                    let a = (ext[(j * me + i) as usize] - ui) / d;
                    let k = 2.0 * self.base_weight([di, dj]) * col.dg(a);
                    diag += k;
                    if self.is_domain(i, j) {
                        let cidx = u.flat_index([(i - self.pad as i64) as usize, if self.dim == 1 { 0 } else { (j - self.pad as i64) as usize }]);
                        row[cidx] -= k;
                    }
                }
            }
            let axes: &[(i64, i64)] = if self.dim == 1 { &[(1, 0)] } else { &[(1, 0), (0, 1)] };
            for &(a, b) in axes {
                for sgn in [1i64, -1] {
                    let (i, j) = (ii + sgn * a, jj + sgn * b);
                    let v = self.value_or_plane(&ext, i, j);
                    let k = c * col.dg((v - ui) / h) / (h * h);
                    diag += k;
                    if self.is_domain(i, j) {
                        let cidx = u.flat_index([(i - self.pad as i64) as usize, if self.dim == 1 { 0 } else { (j - self.pad as i64) as usize }]);
                        row[cidx] -= k;
                    }
                }
            }
            let x = self.ext_center(ii, jj);
            diag += self.far_rays_slope(&x, self.plane_at(&x) - ui);
            row[r] += diag;
            for v in row.iter_mut() {
                *v *= scale;
            }
        });
        Ok(hess)
    }

    /// `int_{B_T} (u(x + z) - u(x)) |z|^{-p} dz` with `T` the truncation radius.
    pub fn truncated_laplacian_at(&self, u: &GraphFunction, idx: usize) -> Result<f64> {
        self.check(u)?;
        let t = self
            .spec
            .truncation_radius
            .ok_or_else(|| Error::Config("truncated operator needs a truncation radius".into()))?;
        if idx >= u.len() {
            return Err(Error::input("grid index out of range"));
        }
        let h = u.spacing();
        let reach = (t / h).ceil() as i64 + 1;
        let mi = u.multi_index(idx);
        let (i0, j0) = (mi[0] as i64, mi[1] as i64);
        let ui = u.values()[idx];
        let jr = if self.dim == 1 { 0..=0 } else { -reach..=reach };
        let mut acc = 0.0;
        for dj in jr {
            for di in -reach..=reach {
                if di == 0 && dj == 0 {
                    continue;
                }
                let w = self.stencil.weight_in_ball([di, dj], t);
                if w != 0.0 {
                    acc += w * (u.lattice_value(i0 + di, j0 + dj) - ui);
                }
            }
        }
        Ok(acc)
    }
}

/// Fractional Laplacian of `u` at grid cell `idx`.
pub fn frac_laplacian(u: &GraphFunction, spec: &KernelSpec, idx: usize) -> Result<f64> {
    GraphOperator::new(spec, u)?.laplacian_at(u, idx)
}

pub fn frac_laplacian_all(u: &GraphFunction, spec: &KernelSpec) -> Result<Vec<f64>> {
    GraphOperator::new(spec, u)?.laplacian_all(u)
}

/// Fractional Laplacian restricted to the ball of the truncation radius.
pub fn truncated_frac_laplacian(u: &GraphFunction, spec: &KernelSpec, idx: usize) -> Result<f64> {
    if spec.truncation_radius.is_none() {
        return Err(Error::Config("truncated operator needs a truncation radius".into()));
    }
    GraphOperator::new(spec, u)?.truncated_laplacian_at(u, idx)
}

/// Fractional curvature of the subgraph of `u` at the graph point over cell `idx`.
pub fn fractional_curvature_graph(u: &GraphFunction, spec: &KernelSpec, idx: usize) -> Result<f64> {
    GraphOperator::new(spec, u)?.curvature_at(u, idx)
}

pub fn fractional_curvature_graph_all(u: &GraphFunction, spec: &KernelSpec) -> Result<Vec<f64>> {
    GraphOperator::new(spec, u)?.curvature_all(u)
}

/// `g = 2 L u - K` at cell `idx`.
pub fn linearization_error(u: &GraphFunction, spec: &KernelSpec, idx: usize) -> Result<f64> {
    let op = GraphOperator::new(spec, u)?;
    Ok(2.0 * op.laplacian_at(u, idx)? - op.curvature_at(u, idx)?)
}
