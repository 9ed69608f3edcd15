use std::time::Instant;

use super::bound::{minimize, Bounds, Objective};
use super::{SolveReport, Solution, SolverConfig, SolverMode};
use crate::domain::{ContactSet, ExteriorSpec, GraphFunction, Obstacle};
use crate::energy::{GraphSPerimeter, QuadraticModel};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

pub(crate) enum NonlocalModel {
    Quadratic { model: QuadraticModel, hessian: Vec<f64>, lipschitz: f64 },
    Exact(GraphSPerimeter),
}

impl NonlocalModel {
    /// `weight * J_s` in quadratic mode, the graph s-perimeter in exact mode.
    pub fn new(spec: &KernelSpec, template: &GraphFunction, mode: SolverMode) -> Result<Self> {
        Ok(match mode {
            SolverMode::Quadratic => {
                let model = QuadraticModel::new(spec, template)?;
                let hessian = model.hessian();
                let n = model.len();
                let lipschitz = hessian
                    .chunks(n)
                    .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
                    .fold(0.0, f64::max);
                Self::Quadratic { model, hessian, lipschitz }
            }
            SolverMode::ExactSet => Self::Exact(GraphSPerimeter::new(spec, template)?),
        })
    }

    pub fn energy(&self, u: &[f64]) -> Result<f64> {
        match self {
            Self::Quadratic { model, .. } => model.energy(u),
            Self::Exact(m) => m.energy(u),
        }
    }

    pub fn gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Quadratic { model, .. } => model.gradient(u),
            Self::Exact(m) => m.gradient(u),
        }
    }

    pub fn hessian(&self, u: &[f64]) -> Result<Vec<f64>> {
        match self {
            Self::Quadratic { hessian, .. } => Ok(hessian.clone()),
            Self::Exact(m) => m.hessian(u),
        }
    }

    pub fn lipschitz(&self, u: &[f64]) -> Result<f64> {
        match self {
            Self::Quadratic { lipschitz, .. } => Ok(*lipschitz),
            Self::Exact(m) => {
                let h = m.hessian(u)?;
                let n = u.len();
                Ok(h.chunks(n).map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max))
            }
        }
    }
}

struct ObstacleObjective {
    model: NonlocalModel,
    /// `h^d f`.
    load: Vec<f64>,
}

impl Objective for ObstacleObjective {
    fn energy(&self, x: &[f64]) -> Result<f64> {
        Ok(self.model.energy(x)? + self.load.iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut g = self.model.gradient(x)?;
        for (gi, l) in g.iter_mut().zip(&self.load) {
            *gi += l;
        }
        Ok(g)
    }
    fn hessian(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.model.hessian(x)
    }
    fn lipschitz(&self, x: &[f64]) -> Result<f64> {
        self.model.lipschitz(x)
    }
}

/// Linear (1D) or transfinite (2D) interpolation of the exterior values on the
/// ghost ring around the box.
pub fn initial_blend(template: &GraphFunction) -> Vec<f64> {
    let m = template.axis_len() as i64;
    let ext = |i: i64, j: i64| template.lattice_value(i, j);
    (0..template.len())
        .map(|idx| {
            let [i, j] = template.multi_index(idx);
            let (i, j) = (i as i64, j as i64);
            let s = (i + 1) as f64 / (m + 1) as f64;
            if template.dim() == 1 {
                return (1.0 - s) * ext(-1, 0) + s * ext(m, 0);
            }
            let t = (j + 1) as f64 / (m + 1) as f64;
            let edges = (1.0 - s) * ext(-1, j) + s * ext(m, j) + (1.0 - t) * ext(i, -1) + t * ext(i, m);
            let corners = (1.0 - s) * (1.0 - t) * ext(-1, -1)
                + s * (1.0 - t) * ext(m, -1)
                + (1.0 - s) * t * ext(-1, m)
                + s * t * ext(m, m);
            edges - corners
        })
        .collect()
}

/// Minimizes the nonlocal graph energy plus `int f u` over `u >= phi` with
/// the given exterior data.
pub fn solve_fractional_obstacle(
    phi: &Obstacle,
    exterior: &ExteriorSpec,
    f: &GraphFunction,
    spec: &KernelSpec,
    config: &SolverConfig,
) -> Result<SolveReport> {
    let clock = Instant::now();
    config.validate()?;
    let phi = phi
        .as_graph()
        .ok_or_else(|| Error::input("the graph obstacle solver needs a graph obstacle"))?;
    crate::energy::same_grid(phi, f)?;
    let template = phi.with_values(vec![0.0; phi.len()])?.with_exterior(exterior.clone())?;
    let mut flags = Vec::new();
    let m = template.axis_len();
    let ring_gap = (0..template.len())
        .filter(|&i| {
            let [a, b] = template.multi_index(i);
            a == 0 || a + 1 == m || (template.dim() == 2 && (b == 0 || b + 1 == m))
        })
        .map(|i| {
            let [a, b] = template.multi_index(i);
            let (a, b) = (a as i64, b as i64);
            let mut nb = vec![(a - 1, b), (a + 1, b)];
            if template.dim() == 2 {
                nb.extend([(a, b - 1), (a, b + 1)]);
            }
            nb.into_iter()
                .map(|(x, y)| phi.values()[i] - template.lattice_value(x, y))
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    if ring_gap > 0.0 {
        flags.push(format!("obstacle exceeds the exterior data near the boundary by {ring_gap:.3e}"));
    }
    let scale = template.spacing().powi(template.dim() as i32);
    let objective = ObstacleObjective {
        model: NonlocalModel::new(spec, &template, config.mode)?,
        load: f.values().iter().map(|v| scale * v).collect(),
    };
    let bounds = Bounds {
        lower: phi.values().to_vec(),
        upper: vec![f64::INFINITY; phi.len()],
    };
    let x0: Vec<f64> = initial_blend(&template)
        .into_iter()
        .zip(phi.values())
        .map(|(a, b)| a.max(*b))
        .collect();
    let out = minimize(&objective, &bounds, x0, config, scale)?;
    flags.extend(out.note);
    let u = template.with_values(out.x)?;
    let tol = config.contact_tolerance(u.spacing(), spec.order.sbar());
    let contact = ContactSet::from_gap(&u, phi.values(), tol)?;
    Ok(SolveReport {
        solution: Solution::Graph(u),
        iterations: out.iterations,
        energy_trace: out.trace,
        kkt_residual: out.kkt,
        contact: Some(contact),
        wall_time: clock.elapsed(),
        converged: out.converged,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::FractionalOrder;

    fn spec(s: f64, h: f64) -> KernelSpec {
        KernelSpec::new(FractionalOrder::new(s).unwrap(), h).unwrap()
    }

    fn graph(h: f64, f: impl Fn(f64) -> f64) -> GraphFunction {
        GraphFunction::from_fn(1, 1.0, h, ExteriorSpec::Zero, |x| f(x[0])).unwrap()
    }

    #[test]
    fn low_obstacle_gives_the_zero_solution() {
        let h = 1.0 / 16.0;
        let r = solve_fractional_obstacle(
            &Obstacle::graph(graph(h, |_| -1.0)),
            &ExteriorSpec::Zero,
            &graph(h, |_| 0.0),
            &spec(0.25, h),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert!(r.graph().unwrap().values().iter().all(|v| v.abs() < 1e-12));
        assert!(r.contact.unwrap().is_empty());
    }

    #[test]
    fn symmetric_obstacle_gives_even_solution() {
        let h = 1.0 / 32.0;
        for mode in [SolverMode::Quadratic, SolverMode::ExactSet] {
            let config = SolverConfig { mode, ..SolverConfig::default() };
            let r = solve_fractional_obstacle(
                &Obstacle::graph(graph(h, |x| 0.5 - 4.0 * x * x)),
                &ExteriorSpec::Zero,
                &graph(h, |_| 0.0),
                &spec(0.25, h),
                &config,
            )
            .unwrap();
            assert!(r.converged, "{mode:?} {:?}", r.flags);
            let u = r.graph().unwrap().values();
            let n = u.len();
            for i in 0..n {
                assert!((u[i] - u[n - 1 - i]).abs() < 1e-10);
            }
            let c = r.contact.unwrap();
            assert!(!c.is_empty());
            let (lo, hi) = (c.indices[0], *c.indices.last().unwrap());
            assert_eq!(lo + hi, n - 1);
            assert_eq!(c.indices.len(), hi - lo + 1);
            assert!(r.energy_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }
}
