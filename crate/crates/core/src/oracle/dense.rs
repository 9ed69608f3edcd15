use std::f64::consts::FRAC_PI_4;

use rayon::prelude::*;

use super::OracleReport;
use crate::domain::{ExteriorSpec, FractionalOrder, GraphFunction, IndicatorGrid};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::quad::gauss_legendre;

/// Largest number of subcell pairs [`dense_interaction`] will visit.
pub const PAIR_BUDGET: f64 = 1e9;

/// Midpoint sum of `|x - y|^{-(n+2s)}` over the subcells of every pair of
/// grid cells with `A` at `x` and `B` at `y`, each cell split `sub` times per
/// axis. Only cells inside the grid take part; exterior rules are ignored.
/// The error estimate compares `sub` against `sub / 2`.
pub fn dense_interaction(a: &IndicatorGrid, b: &IndicatorGrid, order: FractionalOrder, sub: usize) -> Result<OracleReport> {
    a.check_compatible(b)?;
    if sub < 2 || sub % 2 != 0 {
        return Err(Error::input("subdivision must be an even number of at least 2"));
    }
    let n = a.dim();
    let (ta, tb) = (a.cells(), b.cells());
    let support = |t: &[f64]| t.iter().filter(|v| **v != 0.0).count() as f64;
    let pairs = support(ta) * support(tb) * (sub as f64).powi(2 * n as i32);
    if pairs > PAIR_BUDGET {
        return Err(Error::OracleRefusal(format!(
            "{pairs:.3e} subcell pairs requested, budget is {PAIR_BUDGET:.0e}; lower the subdivision or the instance size"
        )));
    }
    if let Some(i) = (0..ta.len()).find(|&i| ta[i] * tb[i] != 0.0) {
        return Err(Error::Divergent(format!("both sets occupy cell {i}")));
    }
    let fine = pair_sum(a, b, order, sub);
    let coarse = pair_sum(a, b, order, sub / 2);
    OracleReport::new(fine, "dense subcell midpoint sum", a.spacing() / sub as f64, (fine - coarse).abs())
}

fn pair_sum(a: &IndicatorGrid, b: &IndicatorGrid, order: FractionalOrder, sub: usize) -> f64 {
    let n = a.dim();
    let h = a.spacing();
    let p = n as f64 + 2.0 * order.s();
    let counts = a.counts().to_vec();
    let span: Vec<i64> = (0..3).map(|ax| if ax < n { counts[ax] as i64 - 1 } else { 0 }).collect();
    let sub_i = sub as i64;
    let eps = h / sub as f64;
    // Weighted displacement sums depend only on the cell offset.
    let offset_sum = |k: [i64; 3]| -> f64 {
        let r = |ax: usize| if ax < n { -(sub_i - 1)..=(sub_i - 1) } else { 0..=0 };
        let mut acc = 0.0;
        for dz in r(2) {
            for dy in r(1) {
                for dx in r(0) {
                    let mult = [dx, dy, dz]
                        .iter()
                        .take(n)
                        .map(|d| (sub_i - d.abs()) as f64)
                        .product::<f64>();
                    let z = [k[0] as f64 * h + dx as f64 * eps, k[1] as f64 * h + dy as f64 * eps, k[2] as f64 * h + dz as f64 * eps];
                    let d2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
                    acc += mult * d2.powf(-0.5 * p);
                }
            }
        }
        acc * eps.powi(2 * n as i32)
    };
    let side = [2 * span[0] + 1, 2 * span[1] + 1, 2 * span[2] + 1];
    let table: Vec<f64> = (0..side[0] * side[1] * side[2])
        .into_par_iter()
        .map(|t| {
            let k = [t % side[0] - span[0], (t / side[0]) % side[1] - span[1], t / (side[0] * side[1]) - span[2]];
            if k == [0, 0, 0] { 0.0 } else { offset_sum(k) }
        })
        .collect();
    let (ta, tb) = (a.cells(), b.cells());
    let idx = |mi: [usize; 3]| [mi[0] as i64, mi[1] as i64, mi[2] as i64];
    (0..ta.len())
        .into_par_iter()
        .filter(|&i| ta[i] != 0.0)
        .map(|i| {
            let mi = idx(a.multi_index(i));
            let mut acc = 0.0;
            for (j, tj) in tb.iter().enumerate() {
                if *tj == 0.0 {
                    continue;
                }
                let mj = idx(b.multi_index(j));
                let k = [mj[0] - mi[0] + span[0], mj[1] - mi[1] + span[1], mj[2] - mi[2] + span[2]];
                acc += tj * table[((k[2] * side[1] + k[1]) * side[0] + k[0]) as usize];
            }
            ta[i] * acc
        })
        .collect::<Vec<f64>>()
        .iter()
        .sum()
}

/// Integral of `g` over the axis box `[lo, hi]` (one or two axes) with
/// `split` panels per axis and a 10-point Gauss rule per panel.
fn box_integral(g: &dyn Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64], split: usize) -> f64 {
    let (x, w) = gauss_legendre(10);
    let d = lo.len();
    let nodes: Vec<Vec<(f64, f64)>> = (0..d)
        .map(|a| {
            let width = (hi[a] - lo[a]) / split as f64;
            (0..split)
                .flat_map(|p| {
                    let c = lo[a] + (p as f64 + 0.5) * width;
                    x.iter().zip(&w).map(move |(xi, wi)| (c + 0.5 * width * xi, 0.5 * width * wi)).collect::<Vec<_>>()
                })
                .collect()
        })
        .collect();
    if d == 1 {
        nodes[0].iter().map(|(z, wz)| wz * g(&[*z])).sum()
    } else {
        nodes[0]
            .iter()
            .map(|(zx, wx)| nodes[1].iter().map(|(zy, wy)| wx * wy * g(&[*zx, *zy])).sum::<f64>())
            .sum()
    }
}

/// Lattice weights of the discrete graph kernel rebuilt from their
/// definitions: second-moment weights in the near box, cell masses outside,
/// and the self-cell moment split over the nearest neighbours.
struct Weights {
    dim: usize,
    side: i64,
    table: Vec<f64>,
}

impl Weights {
    fn new(dim: usize, h: f64, p: f64, near: i64, extent: i64) -> Self {
        let self_moment = if dim == 1 {
            2.0 * (0.5 * h).powf(3.0 - p) / (3.0 - p)
        } else {
            let (x, w) = gauss_legendre(20);
            let edge = 0.5 * h;
            8.0 * x
                .iter()
                .zip(&w)
                .map(|(xi, wi)| {
                    let t = FRAC_PI_4 * 0.5 * (xi + 1.0);
                    FRAC_PI_4 * 0.5 * wi * 0.5 * (edge / t.cos()).powf(4.0 - p) / (4.0 - p)
                })
                .sum::<f64>()
        };
        let side = extent + 1;
        let rows = if dim == 1 { 1 } else { side };
        let table = (0..side * rows)
            .into_par_iter()
            .map(|t| {
                let (a, b) = (t % side, t / side);
                if a == 0 && b == 0 {
                    return 0.0;
                }
                let lo: Vec<f64> = [a, b].iter().take(dim).map(|k| (*k as f64 - 0.5) * h).collect();
                let hi: Vec<f64> = [a, b].iter().take(dim).map(|k| (*k as f64 + 0.5) * h).collect();
                let r2 = |z: &[f64]| z.iter().map(|v| v * v).sum::<f64>();
                let mut v = if a.max(b) <= near {
                    let zk2 = ((a * a + b * b) as f64) * h * h;
                    box_integral(&|z| r2(z).powf(1.0 - 0.5 * p), &lo, &hi, 4) / zk2
                } else {
                    box_integral(&|z| r2(z).powf(-0.5 * p), &lo, &hi, 4)
                };
                if a + b == 1 {
                    v += 0.5 * self_moment / (h * h);
                }
                v
            })
            .collect();
        Self { dim, side, table }
    }

    fn get(&self, k: [i64; 2]) -> f64 {
        let (a, b) = (k[0].abs(), if self.dim == 1 { 0 } else { k[1].abs() });
        self.table[(b * self.side + a) as usize]
    }
}

/// Mass of the graph kernel `|z|^{-p}` outside the box `[-e, e]^d`.
fn mass_outside_box(dim: usize, e: f64, p: f64) -> f64 {
    if dim == 1 {
        return 2.0 * e.powf(1.0 - p) / (p - 1.0);
    }
    let (x, w) = gauss_legendre(30);
    8.0 * x
        .iter()
        .zip(&w)
        .map(|(xi, wi)| {
            let t = FRAC_PI_4 * 0.5 * (xi + 1.0);
            FRAC_PI_4 * 0.5 * wi * (e / t.cos()).powf(2.0 - p) / (p - 2.0)
        })
        .sum::<f64>()
}

/// Quarter double sum `1/4 sum_{i,j not both exterior} h^d W_ij (w_i - w_j)^2`
/// over the lattice, with `w = u - c` for a flat exterior `c`.
pub fn dense_quadratic_energy(u: &GraphFunction, spec: &KernelSpec) -> Result<OracleReport> {
    spec.check_spacing(u.spacing())?;
    let offset = match u.exterior() {
        ExteriorSpec::Zero => 0.0,
        ExteriorSpec::Plane(pl) if pl.slope.iter().all(|a| *a == 0.0) => pl.offset,
        _ => return Err(Error::UnsupportedExterior("the dense energy oracle needs a flat exterior".into())),
    };
    let n = u.len();
    if n > 128 {
        return Err(Error::OracleRefusal(format!("{n} cells requested, the dense energy oracle takes at most 128")));
    }
    let d = u.dim();
    let h = u.spacing();
    let p = d as f64 + 1.0 + 2.0 * spec.order.s();
    let near = spec.near_cells() as i64;
    let m = u.axis_len() as i64;
    let reach = m + near + 2;
    let weights = Weights::new(d, h, p, near, 2 * reach);
    let w: Vec<f64> = u.values().iter().map(|v| v - offset).collect();
    let vol = h.powi(d as i32);
    let tail = mass_outside_box(d, (reach as f64 + 0.5) * h, p);
    let jr = |c: i64| if d == 1 { 0..=0 } else { c - reach..=c + reach };
    let inside = |i: i64, j: i64| i >= 0 && i < m && (d == 1 || (j >= 0 && j < m));
    let terms: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|a| {
            let [ia, ja] = u.multi_index(a);
            let (ia, ja) = (ia as i64, ja as i64);
            let mut interior = 0.0;
            let mut exterior = tail;
            for j in jr(ja) {
                for i in ia - reach..=ia + reach {
                    if i == ia && j == ja {
                        continue;
                    }
                    let wt = weights.get([i - ia, j - ja]);
                    if inside(i, j) {
                        let b = u.flat_index([i as usize, j as usize]);
                        interior += wt * (w[a] - w[b]).powi(2);
                    } else {
                        exterior += wt;
                    }
                }
            }
            0.25 * interior + 0.5 * exterior * w[a] * w[a]
        })
        .collect();
    let value = vol * terms.iter().sum::<f64>();
    OracleReport::new(value, "dense quarter double sum", h, 0.0)
}
