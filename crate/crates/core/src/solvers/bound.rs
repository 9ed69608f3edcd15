use nalgebra::{DMatrix, DVector};

use super::{Method, SolverConfig, StepRule};
use crate::error::{Error, Result};

pub(crate) trait Objective {
    fn energy(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Dense row-major Hessian.
    fn hessian(&self, x: &[f64]) -> Result<Vec<f64>>;
    /// Bound on the gradient's Lipschitz constant, used by projected gradient steps.
    fn lipschitz(&self, x: &[f64]) -> Result<f64>;
}

#[derive(Debug, Clone)]
pub(crate) struct Bounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Bounds {
    pub fn project(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    /// `max_i |x_i - P(x_i - g_i / scale)|`.
    pub fn residual(&self, x: &[f64], g: &[f64], scale: f64) -> f64 {
        x.iter()
            .zip(g)
            .zip(self.lower.iter().zip(&self.upper))
            .map(|((v, gi), (l, u))| (v - (v - gi / scale).clamp(*l, *u)).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub trace: Vec<f64>,
    pub kkt: f64,
    pub converged: bool,
    pub note: Option<String>,
}

/// Bound-constrained minimization from a feasible start. The KKT residual
/// divides gradients by `kkt_scale`.
pub(crate) fn minimize(
    obj: &dyn Objective,
    bounds: &Bounds,
    x0: Vec<f64>,
    config: &SolverConfig,
    kkt_scale: f64,
) -> Result<Outcome> {
    let mut x = x0;
    bounds.project(&mut x);
    let mut e = obj.energy(&x)?;
    let mut trace = vec![e];
    let mut alpha_prev: f64 = 1.0;
    for it in 0..config.max_iters {
        let g = obj.gradient(&x)?;
        let kkt = bounds.residual(&x, &g, kkt_scale);
        if kkt <= config.tol_kkt {
            return Ok(Outcome { x, iterations: it, trace, kkt, converged: true, note: None });
        }
        let step = match config.method {
            Method::ProjectedNewton => newton_direction(obj, bounds, &x, &g, kkt_scale)?,
            Method::ProjectedGradient => {
                let l = obj.lipschitz(&x)?.max(f64::MIN_POSITIVE);
                let d: Vec<f64> = g.iter().map(|v| v / l).collect();
                let free = vec![false; x.len()];
                Direction { d, free }
            }
        };
        let start = match (config.method, config.step_rule) {
            (_, StepRule::FixedStep { tau }) => tau,
            (Method::ProjectedNewton, _) => 1.0,
            (Method::ProjectedGradient, _) => (2.0 * alpha_prev).min(1e6),
        };
        let Some((y, ey, alpha)) = line_search(obj, bounds, &x, e, &g, &step, start, config)? else {
            let kkt = bounds.residual(&x, &g, kkt_scale);
            return Ok(Outcome {
                x,
                iterations: it,
                trace,
                kkt,
                converged: false,
                note: Some("line search found no decrease".into()),
            });
        };
        alpha_prev = alpha;
        let decrease = e - ey;
        x = y;
        e = ey;
        trace.push(e);
        if decrease <= config.tol_energy * e.abs().max(1.0) {
            let g = obj.gradient(&x)?;
            let kkt = bounds.residual(&x, &g, kkt_scale);
            let converged = kkt <= config.tol_kkt;
            return Ok(Outcome {
                x,
                iterations: it + 1,
                trace,
                kkt,
                converged,
                note: (!converged).then(|| "energy stagnated above the KKT tolerance".into()),
            });
        }
    }
    let g = obj.gradient(&x)?;
    let kkt = bounds.residual(&x, &g, kkt_scale);
    let converged = kkt <= config.tol_kkt;
    Ok(Outcome {
        x,
        iterations: config.max_iters,
        trace,
        kkt,
        converged,
        note: (!converged).then(|| format!("no convergence in {} iterations", config.max_iters)),
    })
}

struct Direction {
    d: Vec<f64>,
    /// Variables moved along the Newton direction; the others along a scaled gradient.
    free: Vec<bool>,
}

fn newton_direction(obj: &dyn Objective, bounds: &Bounds, x: &[f64], g: &[f64], scale: f64) -> Result<Direction> {
    let n = x.len();
    let width = bounds.residual(x, g, scale).min(1e-6);
    let binding: Vec<bool> = (0..n)
        .map(|i| (x[i] - bounds.lower[i] <= width && g[i] > 0.0) || (bounds.upper[i] - x[i] <= width && g[i] < 0.0))
        .collect();
    let idx: Vec<usize> = (0..n).filter(|&i| !binding[i]).collect();
    let h = obj.hessian(x)?;
    let mut d = vec![0.0; n];
    for i in 0..n {
        if binding[i] {
            let hii = h[i * n + i];
            d[i] = g[i] / if hii > 0.0 { hii } else { 1.0 };
        }
    }
    if !idx.is_empty() {
        let k = idx.len();
        let sub = DMatrix::from_fn(k, k, |r, c| h[idx[r] * n + idx[c]]);
        let rhs = DVector::from_iterator(k, idx.iter().map(|&i| g[i]));
        let sol = regularized_solve(sub, &rhs)?;
        for (r, &i) in idx.iter().enumerate() {
            d[i] = sol[r];
        }
    }
    Ok(Direction { d, free: (0..n).map(|i| !binding[i]).collect() })
}

/// Cholesky solve, shifting the diagonal until the matrix is positive definite.
fn regularized_solve(m: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let k = m.nrows();
    let diag_max = (0..k).map(|i| m[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut shift = 0.0;
    for _ in 0..60 {
        let mut a = m.clone();
        for i in 0..k {
            a[(i, i)] += shift;
        }
        if let Some(ch) = a.cholesky() {
            return Ok(ch.solve(rhs));
        }
        shift = if shift == 0.0 { 1e-10 * diag_max } else { 10.0 * shift };
    }
    Err(Error::Singular)
}

#[allow(clippy::too_many_arguments)]
fn line_search(
    obj: &dyn Objective,
    bounds: &Bounds,
    x: &[f64],
    e: f64,
    g: &[f64],
    step: &Direction,
    start: f64,
    config: &SolverConfig,
) -> Result<Option<(Vec<f64>, f64, f64)>> {
    let (c1, shrink, fixed) = match config.step_rule {
        StepRule::BacktrackingArmijo { c1, shrink } => (c1, shrink, false),
        StepRule::FixedStep { .. } => (0.0, 0.5, true),
    };
    let mut alpha = start;
    let slack = 1e-12 * e.abs().max(1.0);
    let noise = 1e-15 * e.abs().max(1.0);
    for _ in 0..60 {
        let mut y: Vec<f64> = x.iter().zip(&step.d).map(|(a, b)| a - alpha * b).collect();
        bounds.project(&mut y);
        let predicted: f64 = (0..x.len())
            .map(|i| if step.free[i] { alpha * g[i] * step.d[i] } else { g[i] * (x[i] - y[i]) })
            .sum();
        let ey = obj.energy(&y)?;
        let accept = if fixed {
            ey <= e + slack
        } else {
            ey <= e - c1 * predicted.max(0.0) || (predicted <= noise && ey <= e + noise)
        };
        if accept && y.as_slice() != x {
            return Ok(Some((y, ey, alpha)));
        }
        if fixed {
            return Ok(None);
        }
        alpha *= shrink;
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        a: Vec<f64>,
        b: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn energy(&self, x: &[f64]) -> Result<f64> {
            let n = x.len();
            let mut e = 0.0;
            for i in 0..n {
                for j in 0..n {
                    e += 0.5 * x[i] * self.a[i * n + j] * x[j];
                }
                e -= self.b[i] * x[i];
            }
            Ok(e)
        }
        fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
            let n = x.len();
            Ok((0..n).map(|i| (0..n).map(|j| self.a[i * n + j] * x[j]).sum::<f64>() - self.b[i]).collect())
        }
        fn hessian(&self, _: &[f64]) -> Result<Vec<f64>> {
            Ok(self.a.clone())
        }
        fn lipschitz(&self, _: &[f64]) -> Result<f64> {
            Ok(self.a.iter().map(|v| v.abs()).sum::<f64>())
        }
    }

    #[test]
    fn both_methods_find_the_bound_constrained_minimizer() {
        let a = vec![2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0];
        let q = Quadratic { a, b: vec![1.0, -4.0, 1.0] };
        let bounds = Bounds { lower: vec![0.0; 3], upper: vec![f64::INFINITY; 3] };
        for method in [Method::ProjectedNewton, Method::ProjectedGradient] {
            let tol_kkt = if method == Method::ProjectedNewton { 1e-12 } else { 1e-7 };
            let config = SolverConfig { method, max_iters: 10_000, tol_kkt, tol_energy: 1e-30, ..SolverConfig::default() };
            let out = minimize(&q, &bounds, vec![1.0; 3], &config, 1.0).unwrap();
            assert!(out.converged, "{method:?} {} {} {:?} {:?}", out.kkt, out.iterations, out.note, out.x);
            for (v, e) in out.x.iter().zip([0.5, 0.0, 0.5]) {
                assert!((v - e).abs() < 1e-6);
            }
            assert!(out.trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        }
    }
}
