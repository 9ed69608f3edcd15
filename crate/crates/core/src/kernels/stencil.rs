use std::f64::consts::FRAC_PI_4;

use super::KernelSpec;
use crate::error::{Error, Result};
use crate::quad::{gl, integrate, integrate_adaptive, ColumnIntegral};

/// Weights `omega_k` of the lattice stencil approximating
/// `int (u(x + z) - u(x)) |z|^{-p} dz` on `R^d`, `p = d + 1 + 2s`.
///
/// Offsets inside the near box `|k|_inf <= K` carry second-moment weights
/// `int_cell |z|^{2-p} / |z_k|^2`, the self cell enters through its moment
/// `c = int_cell0 z_1^2 |z|^{-p}` split over the nearest neighbours, and all
/// other cells carry their exact mass `int_cell |z|^{-p}`.
#[derive(Debug, Clone)]
pub struct GraphStencil {
    dim: usize,
    h: f64,
    p: f64,
    near: i64,
    self_moment: f64,
    extent: i64,
    table: Vec<f64>,
    total: f64,
    column: ColumnIntegral,
}

impl GraphStencil {
    /// Builds weights for offsets with `|k|_inf <= extent`.
    pub fn new(spec: &KernelSpec, dim: usize, extent: usize) -> Result<Self> {
        spec.validate()?;
        if dim != 1 && dim != 2 {
            return Err(Error::input("graph stencils exist for base dimension 1 or 2"));
        }
        let h = spec.spacing;
        let s = spec.order.s();
        let p = dim as f64 + 1.0 + 2.0 * s;
        let near = spec.near_cells() as i64;
        let extent = (extent as i64).max(near + 1);
        let self_moment = if dim == 1 {
            2.0 * (0.5 * h).powf(3.0 - p) / (3.0 - p)
        } else {
            0.5 * box_moment_2d(0.5 * h, p)
        };
        let mut st = Self {
            dim,
            h,
            p,
            near,
            self_moment,
            extent,
            table: Vec::new(),
            total: 0.0,
            column: ColumnIntegral::new(p),
        };
        st.check_ring_mass()?;
        let side = (extent + 1) as usize;
        let rows = if dim == 1 { 1 } else { side };
        let mut table = vec![0.0; side * rows];
        for j in 0..rows {
            for i in 0..side {
                table[j * side + i] = st.compute_weight([i as i64, j as i64]);
            }
        }
        st.table = table;
        let mut near_sum = 0.0;
        let jr = if dim == 1 { 0..=0 } else { -near..=near };
        for j in jr {
            for i in -near..=near {
                near_sum += st.weight([i, j]);
            }
        }
        let edge = (near as f64 + 0.5) * h;
        st.total = near_sum + exterior_mass(dim, edge, p);
        Ok(st)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }
    #[inline]
    pub fn spacing(&self) -> f64 {
        self.h
    }
    /// Exponent `p` of the graph kernel.
    #[inline]
    pub fn exponent(&self) -> f64 {
        self.p
    }
    /// Sum of all weights over the infinite lattice.
    #[inline]
    pub fn total_mass(&self) -> f64 {
        self.total
    }
    /// Second moment of the self cell, `int_cell0 z_1^2 |z|^{-p}`.
    #[inline]
    pub fn self_moment(&self) -> f64 {
        self.self_moment
    }
    #[inline]
    pub fn column(&self) -> &ColumnIntegral {
        &self.column
    }
    #[inline]
    pub fn extent(&self) -> i64 {
        self.extent
    }

    /// Weight of offset `k` (zero for `k = 0`).
    #[inline]
    pub fn weight(&self, k: [i64; 2]) -> f64 {
        let (a, b) = (k[0].abs(), k[1].abs());
        if a <= self.extent && b <= self.extent {
            let side = (self.extent + 1) as usize;
            self.table[b as usize * side + a as usize]
        } else {
            self.compute_weight([a, b])
        }
    }

    /// Weight restricted to the part of the cell inside the ball `|z| < r`.
    pub fn weight_in_ball(&self, k: [i64; 2], r: f64) -> f64 {
        let h = self.h;
        let zc = ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt() * h;
        let half_diag = 0.5 * h * (self.dim as f64).sqrt();
        if zc + half_diag <= r {
            return self.weight(k);
        }
        if zc - half_diag >= r {
            return 0.0;
        }
        let frac = if self.dim == 1 {
            let (a, b) = ((k[0].abs() as f64 - 0.5) * h, (k[0].abs() as f64 + 0.5) * h);
            let top = b.min(r);
            if top <= a {
                0.0
            } else {
                cell_mass_1d(a, top, self.p) / cell_mass_1d(a, b, self.p)
            }
        } else {
            let m = 16;
            let (mut inside, mut all) = (0.0, 0.0);
            for jj in 0..m {
                for ii in 0..m {
                    let x = (k[0] as f64 - 0.5 + (ii as f64 + 0.5) / m as f64) * h;
                    let y = (k[1] as f64 - 0.5 + (jj as f64 + 0.5) / m as f64) * h;
                    let w = (x * x + y * y).powf(-0.5 * self.p);
                    all += w;
                    if x * x + y * y < r * r {
                        inside += w;
                    }
                }
            }
            inside / all
        };
        self.weight(k) * frac
    }

    fn compute_weight(&self, k: [i64; 2]) -> f64 {
        let (a, b) = (k[0].abs(), if self.dim == 1 { 0 } else { k[1].abs() });
        if a == 0 && b == 0 {
            return 0.0;
        }
        let h = self.h;
        let mut w = if a.max(b) <= self.near {
            let r2 = ((a * a + b * b) as f64) * h * h;
            self.cell_moment(a, b) / r2
        } else {
            self.cell_mass(a, b)
        };
        if a + b == 1 {
            w += 0.5 * self.self_moment / (h * h);
        }
        w
    }

    fn cell_moment(&self, a: i64, b: i64) -> f64 {
        let h = self.h;
        let (x0, x1) = ((a as f64 - 0.5) * h, (a as f64 + 0.5) * h);
        if self.dim == 1 {
            return (x1.powf(3.0 - self.p) - x0.powf(3.0 - self.p)) / (3.0 - self.p);
        }
        let (y0, y1) = ((b as f64 - 0.5) * h, (b as f64 + 0.5) * h);
        let f = |x: f64, y: f64| corner_moment(x, y, self.p);
        f(x1, y1) - f(x0, y1) - f(x1, y0) + f(x0, y0)
    }

    fn cell_mass(&self, a: i64, b: i64) -> f64 {
        let h = self.h;
        if self.dim == 1 {
            return cell_mass_1d((a as f64 - 0.5) * h, (a as f64 + 0.5) * h, self.p);
        }
        let n = if a.max(b) <= 24 { 8 } else { 3 };
        let (x, w) = gl(n);
        let mut acc = 0.0;
        for (xi, wi) in x.iter().zip(w) {
            for (yj, wj) in x.iter().zip(w) {
                let zx = (a as f64 + 0.5 * xi) * h;
                let zy = (b as f64 + 0.5 * yj) * h;
                acc += wi * wj * (zx * zx + zy * zy).powf(-0.5 * self.p);
            }
        }
        acc * 0.25 * h * h
    }

    fn check_ring_mass(&self) -> Result<()> {
        let h = self.h;
        let near = self.near;
        let mut sum = 0.0;
        let jr = if self.dim == 1 { 0..=0 } else { -near..=near };
        for j in jr {
            for i in -near..=near {
                if i == 0 && j == 0 {
                    sum += if self.dim == 1 { self.self_moment } else { 2.0 * self.self_moment };
                } else {
                    sum += self.cell_moment(i.abs(), j.abs());
                }
            }
        }
        let edge = (near as f64 + 0.5) * h;
        let exact = if self.dim == 1 {
            2.0 * edge.powf(3.0 - self.p) / (3.0 - self.p)
        } else {
            box_moment_2d(edge, self.p)
        };
        if ((sum - exact) / exact).abs() > 1e-10 {
            return Err(Error::Config(format!(
                "near-field weights carry moment {sum}, analytic value {exact}"
            )));
        }
        Ok(())
    }
}

/// `int_a^b |z|^{-p} dz` for `0 < a < b`.
pub(crate) fn cell_mass_1d(a: f64, b: f64, p: f64) -> f64 {
    (a.powf(1.0 - p) - b.powf(1.0 - p)) / (p - 1.0)
}

/// `int_{[-L, L]^2} |z|^{2-p} dz` in polar coordinates.
fn box_moment_2d(edge: f64, p: f64) -> f64 {
    let e = 4.0 - p;
    8.0 * integrate(&|t: f64| (edge / t.cos()).powf(e) / e, 0.0, FRAC_PI_4, 24)
}

/// `int_{R^2 \ [-L, L]^2} |z|^{-p} dz`, or the 1D analogue.
pub(crate) fn exterior_mass(dim: usize, edge: f64, p: f64) -> f64 {
    if dim == 1 {
        2.0 * edge.powf(1.0 - p) / (p - 1.0)
    } else {
        let e = 2.0 - p;
        8.0 * integrate(&|t: f64| (edge / t.cos()).powf(e) / (-e), 0.0, FRAC_PI_4, 24)
    }
}

/// `int_0^x int_0^y |z|^{2-p}`, extended oddly in each argument.
fn corner_moment(x: f64, y: f64, p: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        return 0.0;
    }
    let sign = x.signum() * y.signum();
    let (x, y) = (x.abs(), y.abs());
    let e = 4.0 - p;
    let split = (y / x).atan();
    let lower = integrate_adaptive(&|t: f64| (x / t.cos()).powf(e) / e, 0.0, split, 1e-17, 12);
    let upper = integrate_adaptive(
        &|t: f64| (y / t.sin()).powf(e) / e,
        split,
        std::f64::consts::FRAC_PI_2,
        1e-17,
        12,
    );
    sign * (lower + upper)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::FractionalOrder;

    fn spec(s: f64, h: f64) -> KernelSpec {
        KernelSpec::new(FractionalOrder::new(s).unwrap(), h).unwrap()
    }

    #[test]
    fn total_mass_matches_lattice_sum_in_1d() {
        let sp = spec(0.3, 1.0 / 64.0);
        let st = GraphStencil::new(&sp, 1, 4096).unwrap();
        let direct: f64 = (1..=4096).map(|k| 2.0 * st.weight([k, 0])).sum::<f64>()
            + exterior_mass(1, 4096.5 / 64.0, st.exponent());
        assert!(((direct - st.total_mass()) / direct).abs() < 1e-12);
    }

    #[test]
    fn far_cells_carry_exact_mass_in_2d() {
        let sp = spec(0.25, 1.0 / 32.0);
        let st = GraphStencil::new(&sp, 2, 40).unwrap();
        let h = 1.0 / 32.0;
        let k = [12i64, 5];
        let f = |x: f64| {
            integrate_adaptive(
                &|y: f64| (x * x + y * y).powf(-0.5 * st.exponent()),
                (k[1] as f64 - 0.5) * h,
                (k[1] as f64 + 0.5) * h,
                1e-14,
                20,
            )
        };
        let exact = integrate_adaptive(&f, (k[0] as f64 - 0.5) * h, (k[0] as f64 + 0.5) * h, 1e-12, 20);
        assert!(((st.weight(k) - exact) / exact).abs() < 1e-9);
    }

    #[test]
    fn construction_checks_near_moment() {
        for dim in [1, 2] {
            for s in [0.1, 0.25, 0.4] {
                assert!(GraphStencil::new(&spec(s, 1.0 / 128.0), dim, 16).is_ok());
            }
        }
    }
}
