use rayon::prelude::*;

use super::{EnergyBreakdown, EnergyMode};
use crate::domain::GraphFunction;
use crate::error::{Error, Result};
use crate::kernels::{GraphOperator, KernelSpec};

/// Quadratic model `J_s(u) = -1/2 h^d w^T A w - h^d b^T w` with `w = u - P`,
/// where `A` is the dense Laplacian matrix and `b` the sampled exterior forcing.
///
/// Up to an additive constant this is the quarter double sum of squared
/// differences over pairs that are not both exterior; its gradient is
/// `-h^d` times the discrete fractional Laplacian.
#[derive(Debug, Clone)]
pub struct QuadraticModel {
    a: Vec<f64>,
    b: Vec<f64>,
    plane: Vec<f64>,
    scale: f64,
}

impl QuadraticModel {
    pub fn new(spec: &KernelSpec, u: &GraphFunction) -> Result<Self> {
        let op = GraphOperator::new(spec, u)?;
        let plane = (0..u.len()).map(|i| op.plane().eval(&u.center(i))).collect();
        Ok(Self {
            a: op.dense_matrix(),
            b: op.exterior_forcing(u)?,
            plane,
            scale: u.spacing().powi(u.dim() as i32),
        })
    }

    pub fn len(&self) -> usize {
        self.plane.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plane.is_empty()
    }

    /// Row-major Laplacian matrix on the domain cells.
    pub fn matrix(&self) -> &[f64] {
        &self.a
    }

    pub fn exterior_forcing(&self) -> &[f64] {
        &self.b
    }

    /// Far-plane values at the cell centers.
    pub fn plane_values(&self) -> &[f64] {
        &self.plane
    }

    pub fn cell_volume(&self) -> f64 {
        self.scale
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.len() {
            return Err(Error::input("value vector does not match the model"));
        }
        Ok(())
    }

    /// Discrete fractional Laplacian `A (u - P) + b`.
    pub fn laplacian(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        let n = self.len();
        let w: Vec<f64> = u.iter().zip(&self.plane).map(|(a, p)| a - p).collect();
        Ok(self
            .a
            .par_chunks(n)
            .zip(&self.b)
            .map(|(row, b)| row.iter().zip(&w).map(|(r, x)| r * x).sum::<f64>() + b)
            .collect())
    }

    pub fn energy(&self, u: &[f64]) -> Result<f64> {
        let lap = self.laplacian(u)?;
        let total: f64 = u
            .iter()
            .zip(&self.plane)
            .zip(lap.iter().zip(&self.b))
            .map(|((x, p), (l, b))| {
                let w = x - p;
                -0.5 * w * (l - b) - b * w
            })
            .sum();
        Ok(self.scale * total)
    }

    pub fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.laplacian(u)?.into_iter().map(|l| -self.scale * l).collect())
    }

    /// `-h^d A`, positive definite.
    pub fn hessian(&self) -> Vec<f64> {
        self.a.iter().map(|v| -self.scale * v).collect()
    }
}

/// Column-integrated graph s-perimeter. Its gradient is `-h^d` times the
/// discrete graph curvature, so near flat graphs it behaves like
/// `2 J_s` of the same data.
#[derive(Debug, Clone)]
pub struct GraphSPerimeter {
    op: GraphOperator,
    template: GraphFunction,
}

impl GraphSPerimeter {
    pub fn new(spec: &KernelSpec, u: &GraphFunction) -> Result<Self> {
        Ok(Self {
            op: GraphOperator::new(spec, u)?,
            template: u.clone(),
        })
    }

    fn graph(&self, u: &[f64]) -> Result<GraphFunction> {
        self.template.with_values(u.to_vec())
    }

    pub fn energy(&self, u: &[f64]) -> Result<f64> {
        self.op.s_perimeter_energy(&self.graph(u)?)
    }

    pub fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        let scale = self.template.spacing().powi(self.template.dim() as i32);
        let k = self.op.curvature_all(&self.graph(u)?)?;
        Ok(k.into_iter().map(|v| -scale * v).collect())
    }

    pub fn hessian(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.op.s_perimeter_hessian(&self.graph(u)?)
    }

    pub fn curvature(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.op.curvature_all(&self.graph(u)?)
    }
}

/// One-sided differences of a cell: `(value, upper neighbor, lower neighbor)`
/// where a neighbor is `None` outside the domain.
struct Difference {
    value: f64,
    plus: Option<usize>,
    minus: Option<usize>,
}

fn cell_differences(v: &GraphFunction, idx: usize) -> Vec<Difference> {
    let h = v.spacing();
    let m = v.axis_len() as i64;
    let [i, j] = v.multi_index(idx);
    let (i, j) = (i as i64, j as i64);
    let index = |a: i64, b: i64| -> Option<usize> {
        let inside = a >= 0 && a < m && (v.dim() == 1 || (b >= 0 && b < m));
        inside.then(|| v.flat_index([a as usize, b.max(0) as usize]))
    };
    let axes: &[(i64, i64)] = if v.dim() == 1 { &[(1, 0)] } else { &[(1, 0), (0, 1)] };
    let center = v.lattice_value(i, j);
    let mut out = Vec::with_capacity(4);
    for &(a, b) in axes {
        out.push(Difference {
            value: (v.lattice_value(i + a, j + b) - center) / h,
            plus: index(i + a, j + b),
            minus: Some(idx),
        });
        out.push(Difference {
            value: (center - v.lattice_value(i - a, j - b)) / h,
            plus: Some(idx),
            minus: index(i - a, j - b),
        });
    }
    out
}

fn area_density(d: &[Difference]) -> f64 {
    (1.0 + 0.5 * d.iter().map(|x| x.value * x.value).sum::<f64>()).sqrt()
}

fn cells_in(v: &GraphFunction, window: Option<&super::Window>) -> Vec<usize> {
    (0..v.len())
        .filter(|&i| window.is_none_or(|w| w.contains(&v.center(i))))
        .collect()
}

/// Graph area `h^d sum sqrt(1 + 1/2 sum_a (D+_a^2 + D-_a^2))` over the
/// cells whose centers lie in `window` (all cells when `None`).
pub fn graph_area(v: &GraphFunction, window: Option<&super::Window>) -> f64 {
    let scale = v.spacing().powi(v.dim() as i32);
    let parts: Vec<f64> = cells_in(v, window)
        .par_iter()
        .map(|&i| area_density(&cell_differences(v, i)))
        .collect();
    scale * parts.iter().sum::<f64>()
}

/// Gradient of [`graph_area`] over the whole domain.
pub fn graph_area_gradient(v: &GraphFunction) -> Vec<f64> {
    let h = v.spacing();
    let scale = h.powi(v.dim() as i32);
    let mut g = vec![0.0; v.len()];
    for i in 0..v.len() {
        let d = cell_differences(v, i);
        let t = area_density(&d);
        for x in &d {
            let c = scale * 0.5 * x.value / (t * h);
            if let Some(p) = x.plus {
                g[p] += c;
            }
            if let Some(m) = x.minus {
                g[m] -= c;
            }
        }
    }
    g
}

/// Dense Hessian (row-major) of [`graph_area`] over the whole domain.
pub fn graph_area_hessian(v: &GraphFunction) -> Vec<f64> {
    let n = v.len();
    let h = v.spacing();
    let scale = h.powi(v.dim() as i32);
    let mut hess = vec![0.0; n * n];
    for i in 0..n {
        let d = cell_differences(v, i);
        let t = area_density(&d);
        let t2 = t * t;
        for (p, xp) in d.iter().enumerate() {
            for (q, xq) in d.iter().enumerate() {
                let delta = if p == q { 1.0 } else { 0.0 };
                let c = scale * (delta - 0.5 * xp.value * xq.value / t2) / (2.0 * t * h * h);
                for (rp, sp) in [(xp.plus, 1.0), (xp.minus, -1.0)] {
                    for (rq, sq) in [(xq.plus, 1.0), (xq.minus, -1.0)] {
                        if let (Some(a), Some(b)) = (rp, rq) {
                            hess[a * n + b] += c * sp * sq;
                        }
                    }
                }
            }
        }
    }
    hess
}

/// `int f u dx'` by the midpoint rule.
pub fn forcing_integral(f: &GraphFunction, u: &GraphFunction) -> Result<f64> {
    same_grid(f, u)?;
    let scale = u.spacing().powi(u.dim() as i32);
    Ok(scale * f.values().iter().zip(u.values()).map(|(a, b)| a * b).sum::<f64>())
}

pub(crate) fn same_grid(a: &GraphFunction, b: &GraphFunction) -> Result<()> {
    let same = a.dim() == b.dim()
        && a.axis_len() == b.axis_len()
        && (a.radius() - b.radius()).abs() <= 1e-12 * a.radius()
        && (a.spacing() - b.spacing()).abs() <= 1e-12 * a.spacing();
    if same {
        Ok(())
    } else {
        Err(Error::input("graphs live on different grids"))
    }
}

/// Nonlocal part of the two-membranes functional in the chosen mode:
/// `2 J_s(u)` for the quadratic model, the graph s-perimeter otherwise.
pub fn membrane_s_term(u: &GraphFunction, spec: &KernelSpec, mode: EnergyMode) -> Result<f64> {
    match mode {
        EnergyMode::Quadratic => Ok(2.0 * QuadraticModel::new(spec, u)?.energy(u.values())?),
        EnergyMode::Exact => GraphSPerimeter::new(spec, u)?.energy(u.values()),
    }
}

/// Energy of a two-membranes pair `(u, v)` with forcings `f` (acting on `u`)
/// and `g` (acting on `v`) over the graph box.
pub fn two_membranes_energy(
    u: &GraphFunction,
    v: &GraphFunction,
    f: &GraphFunction,
    g: &GraphFunction,
    spec: &KernelSpec,
    mode: EnergyMode,
) -> Result<EnergyBreakdown> {
    same_grid(u, v)?;
    Ok(EnergyBreakdown::new(
        membrane_s_term(u, spec, mode)?,
        graph_area(v, None),
        forcing_integral(f, u)?,
        forcing_integral(g, v)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ExteriorSpec, FractionalOrder};

    fn spec(s: f64, h: f64) -> KernelSpec {
        KernelSpec::new(FractionalOrder::new(s).unwrap(), h).unwrap()
    }

    fn bump(dim: usize, h: f64, amp: f64) -> GraphFunction {
        GraphFunction::from_fn(dim, 1.0, h, ExteriorSpec::Zero, |x| {
            let r2: f64 = x.iter().map(|v| v * v).sum();
            if r2 < 0.64 {
                amp * (1.0 - r2 / 0.64).powi(2)
            } else {
                0.0
            }
        })
        .unwrap()
    }

    #[test]
    fn flat_and_linear_graph_areas() {
        let flat = GraphFunction::from_fn(1, 1.0, 1.0 / 16.0, ExteriorSpec::Zero, |_| 0.0).unwrap();
        assert!((graph_area(&flat, None) - 2.0).abs() < 1e-10);
        let a = 0.7;
        let lin = GraphFunction::from_fn(1, 1.0, 1.0 / 16.0, ExteriorSpec::plane(vec![a], 0.0), |x| a * x[0]).unwrap();
        assert!((graph_area(&lin, None) - 2.0 * (1.0 + a * a).sqrt()).abs() < 1e-10);
    }

    fn directional_fd(f: &dyn Fn(&[f64]) -> f64, u: &[f64], dir: &[f64], eps: f64) -> f64 {
        let shift = |t: f64| -> Vec<f64> { u.iter().zip(dir).map(|(a, b)| a + t * b).collect() };
        (f(&shift(eps)) - f(&shift(-eps))) / (2.0 * eps)
    }

    #[test]
    fn area_gradient_and_hessian_match_differences() {
        let v = bump(2, 0.125, 0.3);
        let dir: Vec<f64> = (0..v.len()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let area = |x: &[f64]| graph_area(&v.with_values(x.to_vec()).unwrap(), None);
        let g = graph_area_gradient(&v);
        let fd = directional_fd(&area, v.values(), &dir, 1e-5);
        let an: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        assert!((fd - an).abs() < 1e-8 * an.abs().max(1.0));
        let hess = graph_area_hessian(&v);
        let n = v.len();
        let gd = |x: &[f64]| -> f64 {
            graph_area_gradient(&v.with_values(x.to_vec()).unwrap()).iter().zip(&dir).map(|(a, b)| a * b).sum()
        };
        let fd2 = directional_fd(&gd, v.values(), &dir, 1e-5);
        let an2: f64 = (0..n).map(|r| (0..n).map(|c| dir[r] * hess[r * n + c] * dir[c]).sum::<f64>()).sum();
        assert!((fd2 - an2).abs() < 1e-6 * an2.abs().max(1.0));
    }

    #[test]
    fn quadratic_gradient_is_minus_scaled_laplacian() {
        let h = 1.0 / 32.0;
        let u = bump(1, h, 0.2);
        let sp = spec(0.25, h);
        let q = QuadraticModel::new(&sp, &u).unwrap();
        let dir: Vec<f64> = (0..u.len()).map(|i| ((i as f64) * 0.37).sin()).collect();
        let e = |x: &[f64]| q.energy(x).unwrap();
        let fd = directional_fd(&e, u.values(), &dir, 1e-4);
        let g = q.gradient(u.values()).unwrap();
        let an: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        assert!((fd - an).abs() < 1e-9 * an.abs().max(1.0));
        let lap = crate::kernels::frac_laplacian_all(&u, &sp).unwrap();
        for (gi, li) in g.iter().zip(lap) {
            assert!((gi + h * li).abs() < 1e-10 * li.abs().max(1.0));
        }
    }

    #[test]
    fn exact_gradient_is_minus_scaled_curvature() {
        let h = 1.0 / 32.0;
        let u = bump(1, h, 0.3);
        let sp = spec(0.3, h);
        let model = GraphSPerimeter::new(&sp, &u).unwrap();
        let dir: Vec<f64> = (0..u.len()).map(|i| ((i as f64) * 0.61).cos()).collect();
        let e = |x: &[f64]| model.energy(x).unwrap();
        let fd = directional_fd(&e, u.values(), &dir, 1e-5);
        let g = model.gradient(u.values()).unwrap();
        let an: f64 = g.iter().zip(&dir).map(|(a, b)| a * b).sum();
        assert!((fd - an).abs() < 1e-6 * an.abs().max(1.0), "{fd} vs {an}");
        let hess = model.hessian(u.values()).unwrap();
        let n = u.len();
        let gd = |x: &[f64]| -> f64 { model.gradient(x).unwrap().iter().zip(&dir).map(|(a, b)| a * b).sum() };
        let fd2 = directional_fd(&gd, u.values(), &dir, 1e-5);
        let an2: f64 = (0..n).map(|r| (0..n).map(|c| dir[r] * hess[r * n + c] * dir[c]).sum::<f64>()).sum();
        assert!((fd2 - an2).abs() < 1e-5 * an2.abs().max(1.0), "{fd2} vs {an2}");
    }

    #[test]
    fn flat_pair_has_area_only() {
        let h = 0.125;
        let z = GraphFunction::from_fn(2, 1.0, h, ExteriorSpec::Zero, |_| 0.0).unwrap();
        let b = two_membranes_energy(&z, &z, &z, &z, &spec(0.25, h), EnergyMode::Quadratic).unwrap();
        assert_eq!(b.s_perimeter, 0.0);
        assert!((b.perimeter - 4.0).abs() < 1e-12);
        assert!((b.total - 4.0).abs() < 1e-12);
    }

    #[test]
    fn exact_and_quadratic_modes_agree_for_small_bumps() {
        let h = 1.0 / 32.0;
        let u = bump(1, h, 0.05);
        let sp = spec(0.25, h);
        let q = membrane_s_term(&u, &sp, EnergyMode::Quadratic).unwrap();
        let e = membrane_s_term(&u, &sp, EnergyMode::Exact).unwrap();
        assert!(((e - q) / q).abs() < 0.05, "{e} vs {q}");
    }
}
