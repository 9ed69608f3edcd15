use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::bound::{minimize, Bounds, Objective};
use super::{Method, SolveReport, Solution, SolverConfig};
use crate::domain::{FractionalOrder, IndicatorGrid, Obstacle};
use crate::energy::{SetEnergy, Window};
use crate::error::{Error, Result};

struct RelaxedObjective<'a> {
    energy: &'a SetEnergy,
    grid: &'a IndicatorGrid,
    lipschitz: f64,
}

impl RelaxedObjective<'_> {
    fn full(&self, x: &[f64]) -> Result<IndicatorGrid> {
        let mut cells = self.grid.cells().to_vec();
        for (&i, v) in self.energy.window_cells().iter().zip(x) {
            cells[i] = *v;
        }
        self.grid.with_cells(cells)
    }
}

impl Objective for RelaxedObjective<'_> {
    fn energy(&self, x: &[f64]) -> Result<f64> {
        self.energy.energy(&self.full(x)?)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.energy.gradient(&self.full(x)?)
    }
    fn hessian(&self, _: &[f64]) -> Result<Vec<f64>> {
        Err(Error::input("the relaxed s-perimeter has no useful Hessian"))
    }
    fn lipschitz(&self, _: &[f64]) -> Result<f64> {
        Ok(self.lipschitz)
    }
}

struct Candidate {
    theta: Vec<f64>,
    energy: f64,
    trace: Vec<f64>,
    gap: f64,
    relaxed_converged: bool,
}

/// Minimizes the s-perimeter in `window` among sets containing the obstacle.
///
/// Cells outside the window keep the values of `frozen`, whose exterior rule
/// describes the data beyond the grid. The relaxed problem over
/// `theta in [chi_O, 1]` is solved by projected gradient, thresholded at 1/2
/// and polished by single and pair flips; extra starts are drawn from the
/// configured seed.
pub fn solve_s_minimal_set(
    obstacle: &Obstacle,
    frozen: &IndicatorGrid,
    window: &Window,
    order: FractionalOrder,
    config: &SolverConfig,
) -> Result<SolveReport> {
    let clock = Instant::now();
    config.validate()?;
    let o = obstacle
        .as_set()
        .ok_or_else(|| Error::input("the set solver needs a set obstacle"))?;
    o.check_compatible(frozen)?;
    let energy = SetEnergy::new(frozen, order, window)?;
    let cells = energy.window_cells().to_vec();
    for (i, (a, b)) in o.cells().iter().zip(frozen.cells()).enumerate() {
        if !energy.in_window(i) && *a > *b + 1e-12 {
            return Err(Error::input("the obstacle protrudes into the frozen complement"));
        }
    }
    let lower: Vec<f64> = cells.iter().map(|&i| o.cells()[i]).collect();
    let lipschitz = cells
        .iter()
        .map(|&i| cells.iter().filter(|&&j| j != i).map(|&j| 2.0 * energy.pair_weight(i, j)).sum::<f64>())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let objective = RelaxedObjective { energy: &energy, grid: frozen, lipschitz };
    let bounds = Bounds { lower: lower.clone(), upper: vec![1.0; cells.len()] };
    let relaxed_config = SolverConfig { method: Method::ProjectedGradient, ..config.clone() };

    let mut starts = vec![cells.iter().zip(&lower).map(|(&i, l)| frozen.cells()[i].max(*l)).collect::<Vec<f64>>()];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.restarts {
        starts.push(lower.iter().map(|l| l + (1.0 - l) * rng.random::<f64>()).collect());
    }
    let mut best: Option<Candidate> = None;
    for x0 in starts {
        let relaxed = minimize(&objective, &bounds, x0, &relaxed_config, 1.0)?;
        let relaxed_energy = *relaxed.trace.last().unwrap();
        let mut theta: Vec<f64> = relaxed.x.iter().map(|v| if *v >= 0.5 { 1.0 } else { 0.0 }).collect();
        let e0 = objective.energy(&theta)?;
        let gap = e0 - relaxed_energy;
        let mut trace = if gap <= 1e-12 * relaxed_energy.abs().max(1.0) { relaxed.trace.clone() } else { vec![] };
        trace.push(e0);
        let e = flip_descent(&objective, &energy, &cells, &lower, &mut theta, e0, &mut trace)?;
        let better = best.as_ref().is_none_or(|b| e < b.energy - 1e-12 * e.abs().max(1.0));
        if better {
            best = Some(Candidate { theta, energy: e, trace, gap, relaxed_converged: relaxed.converged });
        }
    }
    let best = best.expect("at least one start");
    let mut flags = Vec::new();
    if best.gap > config.tol_energy * best.energy.abs().max(1.0) {
        flags.push(format!("thresholding raised the energy by {:.3e} (relaxation gap)", best.gap));
    }
    if !best.relaxed_converged {
        flags.push("relaxed stage stopped above the KKT tolerance".into());
    }
    let g = objective.gradient(&best.theta)?;
    let kkt = bounds.residual(&best.theta, &g, lipschitz);
    let set = objective.full(&best.theta)?;
    Ok(SolveReport {
        solution: Solution::Set(set),
        iterations: best.trace.len().saturating_sub(1),
        energy_trace: best.trace,
        kkt_residual: kkt,
        contact: None,
        wall_time: clock.elapsed(),
        converged: kkt <= config.tol_kkt,
        flags,
    })
}

/// Applies the best improving single or pair flip until none remains.
fn flip_descent(
    obj: &RelaxedObjective<'_>,
    energy: &SetEnergy,
    cells: &[usize],
    lower: &[f64],
    theta: &mut [f64],
    mut e: f64,
    trace: &mut Vec<f64>,
) -> Result<f64> {
    let n = cells.len();
    loop {
        let g = obj.gradient(theta)?;
        let delta: Vec<f64> = (0..n)
            .map(|i| if theta[i] == 0.0 { 1.0 } else if lower[i] < 1.0 { -1.0 } else { 0.0 })
            .collect();
        let mut best = (0.0, None);
        for i in 0..n {
            if delta[i] == 0.0 {
                continue;
            }
            let single = g[i] * delta[i];
            if single < best.0 {
                best = (single, Some((i, None)));
            }
            for j in i + 1..n {
                if delta[j] == 0.0 {
                    continue;
                }
                let pair = single + g[j] * delta[j] - 2.0 * energy.pair_weight(cells[i], cells[j]) * delta[i] * delta[j];
                if pair < best.0 {
                    best = (pair, Some((i, Some(j))));
                }
            }
        }
        let Some((i, j)) = best.1 else { return Ok(e) };
        if best.0 > -1e-13 * e.abs().max(1.0) {
            return Ok(e);
        }
        theta[i] += delta[i];
        if let Some(j) = j {
            theta[j] += delta[j];
        }
        let next = obj.energy(theta)?;
        if next >= e {
            theta[i] -= delta[i];
            if let Some(j) = j {
                theta[j] -= delta[j];
            }
            return Ok(e);
        }
        e = next;
        trace.push(e);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SetExterior;

    #[test]
    fn half_space_is_a_fixed_point() {
        let h = 0.125;
        let ext = SetExterior::half_space(&[0.0, 1.0], 0.0).unwrap();
        let frozen = IndicatorGrid::centered(2, 1.0, h, ext.clone(), |x| if x[1] < 0.0 { 1.0 } else { 0.0 }).unwrap();
        let empty = frozen.with_cells(vec![0.0; frozen.len()]).unwrap();
        let window = Window::cube(2, 0.25);
        let order = FractionalOrder::new(0.25).unwrap();
        let config = SolverConfig { restarts: 1, ..SolverConfig::default() };
        let r = solve_s_minimal_set(&Obstacle::set(empty), &frozen, &window, order, &config).unwrap();
        assert_eq!(r.set().unwrap().cells(), frozen.cells());
        assert!(r.energy_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }
}
