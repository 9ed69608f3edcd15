use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::bound::{minimize, Bounds, Objective, Outcome};
use super::obstacle::{initial_blend, NonlocalModel};
use super::{Method, SolveReport, Solution, SolverConfig, SolverMode, StepRule};
use crate::domain::{ContactSet, ExteriorSpec, GraphFunction};
use crate::energy::{graph_area, graph_area_gradient, graph_area_hessian, same_grid};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Data of a two-membranes problem: the upper graph `u` carries the nonlocal
/// energy and forcing `f`, the lower graph `v` the area and forcing `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MembraneProblem {
    pub u_exterior: ExteriorSpec,
    pub v_exterior: ExteriorSpec,
    pub f: GraphFunction,
    pub g: GraphFunction,
}

impl MembraneProblem {
    pub fn new(u_exterior: ExteriorSpec, v_exterior: ExteriorSpec, f: GraphFunction, g: GraphFunction) -> Result<Self> {
        same_grid(&f, &g)?;
        let p = Self { u_exterior, v_exterior, f, g };
        p.check_ordering()?;
        Ok(p)
    }

    fn templates(&self) -> Result<(GraphFunction, GraphFunction)> {
        let zero = self.f.with_values(vec![0.0; self.f.len()])?;
        Ok((zero.with_exterior(self.u_exterior.clone())?, zero.with_exterior(self.v_exterior.clone())?))
    }

    /// `v <= u` on the two ghost rings around the box.
    fn check_ordering(&self) -> Result<()> {
        let (tu, tv) = self.templates()?;
        let m = tu.axis_len() as i64;
        let ring = |k: i64| k < 0 || k >= m;
        let jr: Vec<i64> = if tu.dim() == 1 { vec![0] } else { (-2..m + 2).collect() };
        for &j in &jr {
            for i in -2..m + 2 {
                if !(ring(i) || (tu.dim() == 2 && ring(j))) {
                    continue;
                }
                let (a, b) = (tu.lattice_value(i, j), tv.lattice_value(i, j));
                if b > a + 1e-12 {
                    return Err(Error::Ordering(format!(
                        "exterior of v ({b}) lies above the exterior of u ({a}) near the boundary"
                    )));
                }
            }
        }
        Ok(())
    }
}

struct MembraneObjective {
    nonlocal: NonlocalModel,
    weight: f64,
    tv: GraphFunction,
    load_u: Vec<f64>,
    load_v: Vec<f64>,
}

impl MembraneObjective {
    fn split<'a>(&self, x: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        x.split_at(self.load_u.len())
    }

    fn graph_v(&self, v: &[f64]) -> Result<GraphFunction> {
        self.tv.with_values(v.to_vec())
    }

    /// Energy in the natural variables `(u, v)`.
    fn energy_uv(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        Ok(self.weight * self.nonlocal.energy(u)?
            + graph_area(&self.graph_v(v)?, None)
            + dot(&self.load_u, u)
            + dot(&self.load_v, v))
    }

    fn gradient_uv(&self, u: &[f64], v: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let gu: Vec<f64> = self
            .nonlocal
            .gradient(u)?
            .iter()
            .zip(&self.load_u)
            .map(|(a, b)| self.weight * a + b)
            .collect();
        let gv: Vec<f64> = graph_area_gradient(&self.graph_v(v)?)
            .iter()
            .zip(&self.load_v)
            .map(|(a, b)| a + b)
            .collect();
        Ok((gu, gv))
    }

    fn lipschitz_uv(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        let n = u.len();
        let row_max = |h: &[f64]| h.chunks(n).map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
        let hv = graph_area_hessian(&self.graph_v(v)?);
        Ok(self.weight * self.nonlocal.lipschitz(u)? + row_max(&hv))
    }
}

/// Variables `x = (v, w)` with `u = v + w` and `w >= 0`.
impl Objective for MembraneObjective {
    fn energy(&self, x: &[f64]) -> Result<f64> {
        let (v, w) = self.split(x);
        let u: Vec<f64> = v.iter().zip(w).map(|(a, b)| a + b).collect();
        self.energy_uv(&u, v)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (v, w) = self.split(x);
        let u: Vec<f64> = v.iter().zip(w).map(|(a, b)| a + b).collect();
        let (gu, gv) = self.gradient_uv(&u, v)?;
        Ok(gu.iter().zip(&gv).map(|(a, b)| a + b).chain(gu.iter().copied()).collect())
    }

    fn hessian(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (v, w) = self.split(x);
        let n = v.len();
        let u: Vec<f64> = v.iter().zip(w).map(|(a, b)| a + b).collect();
        let hu = self.nonlocal.hessian(&u)?;
        let hv = graph_area_hessian(&self.graph_v(v)?);
        let mut h = vec![0.0; 4 * n * n];
        for r in 0..n {
            for c in 0..n {
                let a = self.weight * hu[r * n + c];
                h[r * 2 * n + c] = a + hv[r * n + c];
                h[r * 2 * n + n + c] = a;
                h[(n + r) * 2 * n + c] = a;
                h[(n + r) * 2 * n + n + c] = a;
            }
        }
        Ok(h)
    }

    fn lipschitz(&self, x: &[f64]) -> Result<f64> {
        let (v, w) = self.split(x);
        let u: Vec<f64> = v.iter().zip(w).map(|(a, b)| a + b).collect();
        Ok(2.0 * self.lipschitz_uv(&u, v)?)
    }
}

/// Minimizes `S(u) + Area(v) + int f u + int g v` over `v <= u`, where `S`
/// is twice the quadratic model or the graph s-perimeter.
pub fn solve_two_membranes(problem: &MembraneProblem, spec: &KernelSpec, config: &SolverConfig) -> Result<SolveReport> {
    let clock = Instant::now();
    config.validate()?;
    problem.check_ordering()?;
    let (tu, tv) = problem.templates()?;
    let n = tu.len();
    let scale = tu.spacing().powi(tu.dim() as i32);
    let weight = match config.mode {
        SolverMode::Quadratic => 2.0,
        SolverMode::ExactSet => 1.0,
    };
    let objective = MembraneObjective {
        nonlocal: NonlocalModel::new(spec, &tu, config.mode)?,
        weight,
        tv: tv.clone(),
        load_u: problem.f.values().iter().map(|v| scale * v).collect(),
        load_v: problem.g.values().iter().map(|v| scale * v).collect(),
    };
    let u0 = initial_blend(&tu);
    let v0: Vec<f64> = initial_blend(&tv).iter().zip(&u0).map(|(a, b)| a.min(*b)).collect();
    let bounds = Bounds {
        lower: [vec![f64::NEG_INFINITY; n], vec![0.0; n]].concat(),
        upper: vec![f64::INFINITY; 2 * n],
    };
    let out = match config.method {
        Method::ProjectedNewton => {
            let x0: Vec<f64> = v0.iter().copied().chain(u0.iter().zip(&v0).map(|(a, b)| a - b)).collect();
            minimize(&objective, &bounds, x0, config, scale)?
        }
        Method::ProjectedGradient => pairwise_gradient(&objective, &bounds, u0, v0, config, scale)?,
    };
    let (v, w) = out.x.split_at(n);
    let u: Vec<f64> = v.iter().zip(w).map(|(a, b)| a + b).collect();
    let u = tu.with_values(u)?;
    let v = tv.with_values(v.to_vec())?;
    let tol = config.contact_tolerance(u.spacing(), spec.order.sbar());
    let contact = ContactSet::from_gap(&u, v.values(), tol)?;
    Ok(SolveReport {
        solution: Solution::Pair { u, v },
        iterations: out.iterations,
        energy_trace: out.trace,
        kkt_residual: out.kkt,
        contact: Some(contact),
        wall_time: clock.elapsed(),
        converged: out.converged,
        flags: out.note.into_iter().collect(),
    })
}

/// Projected gradient in `(u, v)`; the projection onto `{v <= u}` replaces
/// violating pairs by their mean. Returns the iterate in `(v, u - v)` form.
fn pairwise_gradient(
    obj: &MembraneObjective,
    bounds: &Bounds,
    mut u: Vec<f64>,
    mut v: Vec<f64>,
    config: &SolverConfig,
    scale: f64,
) -> Result<Outcome> {
    let pack = |u: &[f64], v: &[f64]| -> Vec<f64> { v.iter().copied().chain(u.iter().zip(v).map(|(a, b)| a - b)).collect() };
    let (c1, shrink) = match config.step_rule {
        StepRule::BacktrackingArmijo { c1, shrink } => (c1, shrink),
        StepRule::FixedStep { .. } => (0.0, 0.5),
    };
    let mut e = obj.energy_uv(&u, &v)?;
    let mut trace = vec![e];
    let mut alpha = match config.step_rule {
        StepRule::FixedStep { tau } => tau,
        _ => 1.0,
    };
    for it in 0..config.max_iters {
        let x = pack(&u, &v);
        let kkt = bounds.residual(&x, &obj.gradient(&x)?, scale);
        if kkt <= config.tol_kkt {
            return Ok(Outcome { x, iterations: it, trace, kkt, converged: true, note: None });
        }
        let (gu, gv) = obj.gradient_uv(&u, &v)?;
        let l = obj.lipschitz_uv(&u, &v)?;
        let mut accepted = None;
        let mut a = if matches!(config.step_rule, StepRule::FixedStep { .. }) { alpha } else { (2.0 * alpha).min(1e6) };
        for _ in 0..60 {
            let mut nu: Vec<f64> = u.iter().zip(&gu).map(|(x, g)| x - a * g / l).collect();
            let mut nv: Vec<f64> = v.iter().zip(&gv).map(|(x, g)| x - a * g / l).collect();
            for (p, q) in nu.iter_mut().zip(nv.iter_mut()) {
                if *q > *p {
                    let mean = 0.5 * (*p + *q);
                    *p = mean;
                    *q = mean;
                }
            }
            let moved: f64 = gu.iter().zip(u.iter().zip(&nu)).map(|(g, (x, y))| g * (x - y)).sum::<f64>()
                + gv.iter().zip(v.iter().zip(&nv)).map(|(g, (x, y))| g * (x - y)).sum::<f64>();
            let en = obj.energy_uv(&nu, &nv)?;
            if en <= e - c1 * moved.max(0.0) && (nu != u || nv != v) {
                accepted = Some((nu, nv, en));
                break;
            }
            if matches!(config.step_rule, StepRule::FixedStep { .. }) {
                break;
            }
            a *= shrink;
        }
        let Some((nu, nv, en)) = accepted else {
            return Ok(Outcome { x, iterations: it, trace, kkt, converged: false, note: Some("line search found no decrease".into()) });
        };
        alpha = a;
        let decrease = e - en;
        u = nu;
        v = nv;
        e = en;
        trace.push(e);
        if decrease <= config.tol_energy * e.abs().max(1.0) {
            break;
        }
    }
    let x = pack(&u, &v);
    let kkt = bounds.residual(&x, &obj.gradient(&x)?, scale);
    let converged = kkt <= config.tol_kkt;
    Ok(Outcome {
        x,
        iterations: trace.len() - 1,
        trace,
        kkt,
        converged,
        note: (!converged).then(|| "projected gradient stopped above the KKT tolerance".into()),
    })
}
