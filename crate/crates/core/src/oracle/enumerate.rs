use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::OracleReport;
use crate::domain::{ExteriorSpec, FractionalOrder, GraphFunction, IndicatorGrid, Obstacle};
use crate::energy::{same_grid, QuadraticModel, SetEnergy, Window};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;

/// Largest number of free cells or nodes the enumerations accept.
pub const MAX_FREE_CELLS: usize = 16;

#[derive(Debug, Clone)]
pub struct SetOutcome {
    pub report: OracleReport,
    pub set: IndicatorGrid,
    /// Window cells not fixed by the obstacle.
    pub free_cells: Vec<usize>,
}

/// Global minimizer of the s-perimeter in `window` among sharp sets that
/// contain the obstacle, found by visiting all `2^k` fillings of the `k`
/// free window cells. Cells outside the window keep the values of `frozen`.
///
/// The energy is bilinear in the cell values without self-pairs, so it is
/// recovered exactly from its values at the empty filling, the single-cell
/// fillings and the two-cell fillings; the winner is then evaluated directly.
pub fn exhaustive_set_min(
    obstacle: &Obstacle,
    frozen: &IndicatorGrid,
    window: &Window,
    order: FractionalOrder,
) -> Result<SetOutcome> {
    let o = obstacle
        .as_set()
        .ok_or_else(|| Error::input("set enumeration needs a set obstacle"))?;
    o.check_compatible(frozen)?;
    if !(o.is_sharp() && frozen.is_sharp()) {
        return Err(Error::RequiresSharp);
    }
    let energy = SetEnergy::new(frozen, order, window)?;
    let free: Vec<usize> = energy.window_cells().iter().copied().filter(|&i| o.cells()[i] < 1.0).collect();
    let k = free.len();
    if k > MAX_FREE_CELLS {
        return Err(Error::OracleRefusal(format!(
            "{k} free cells mean 2^{k} fillings; the enumeration takes at most {MAX_FREE_CELLS}"
        )));
    }
    let mut base = frozen.cells().to_vec();
    for &i in energy.window_cells() {
        base[i] = o.cells()[i];
    }
    let eval = |cells: &[usize]| -> Result<f64> {
        let mut c = base.clone();
        for &i in cells {
            c[free[i]] = 1.0;
        }
        energy.energy(&frozen.with_cells(c)?)
    };
    let e0 = eval(&[])?;
    let single: Vec<f64> = (0..k).map(|i| eval(&[i])).collect::<Result<_>>()?;
    let mut pair = vec![0.0; k * k];
    for i in 0..k {
        for j in i + 1..k {
            let v = eval(&[i, j])? - single[i] - single[j] + e0;
            pair[i * k + j] = v;
        }
    }
    let linear: Vec<f64> = single.iter().map(|v| v - e0).collect();
    let total = 1usize << k;
    let (best_energy, best) = (0..total)
        .into_par_iter()
        .map(|mask| {
            let mut e = e0;
            for i in 0..k {
                if mask >> i & 1 == 1 {
                    e += linear[i];
                    for j in i + 1..k {
                        if mask >> j & 1 == 1 {
                            e += pair[i * k + j];
                        }
                    }
                }
            }
            (e, mask)
        })
        .reduce(|| (f64::INFINITY, usize::MAX), |a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    let chosen: Vec<usize> = (0..k).filter(|i| best >> i & 1 == 1).collect();
    let direct = eval(&chosen)?;
    let mut cells = base;
    for &i in &chosen {
        cells[free[i]] = 1.0;
    }
    Ok(SetOutcome {
        report: OracleReport::new(direct, "set enumeration", frozen.spacing(), (direct - best_energy).abs())?,
        set: frozen.with_cells(cells)?,
        free_cells: free,
    })
}

#[derive(Debug, Clone)]
pub struct ActiveSetOutcome {
    pub report: OracleReport,
    pub solution: GraphFunction,
    /// Contact pattern of the winner, one bit per node.
    pub pattern: usize,
    /// Patterns whose stationarity system could not be factored.
    pub skipped: Vec<usize>,
    pub feasible: usize,
}

/// Minimizer of the quadratic graph energy plus `int f u` over `u >= phi`,
/// found by solving the stationarity system of every contact pattern and
/// keeping the feasible pattern of lowest energy. Near-ties go to the
/// pattern with the fewest contacts, then to the smallest pattern index.
pub fn exhaustive_active_set(
    phi: &GraphFunction,
    exterior: &ExteriorSpec,
    f: &GraphFunction,
    spec: &KernelSpec,
) -> Result<ActiveSetOutcome> {
    same_grid(phi, f)?;
    let n = phi.len();
    if n > MAX_FREE_CELLS {
        return Err(Error::OracleRefusal(format!(
            "{n} nodes mean 2^{n} contact patterns; the enumeration takes at most {MAX_FREE_CELLS}"
        )));
    }
    let template = phi.with_values(vec![0.0; n])?.with_exterior(exterior.clone())?;
    let model = QuadraticModel::new(spec, &template)?;
    let vol = model.cell_volume();
    let hess = model.hessian();
    let g0 = model.gradient(&vec![0.0; n])?;
    let q: Vec<f64> = g0.iter().zip(f.values()).map(|(g, fv)| g + vol * fv).collect();
    let ph = phi.values();
    let energy = |u: &[f64]| -> Result<f64> {
        Ok(model.energy(u)? + vol * u.iter().zip(f.values()).map(|(a, b)| a * b).sum::<f64>())
    };
    let diag = (0..n).map(|i| hess[i * n + i].abs()).fold(0.0, f64::max);
    let tol_u = 1e-10 * (1.0 + ph.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let tol_l = 1e-9 * diag * (1.0 + ph.iter().fold(0.0f64, |m, v| m.max(v.abs())));

    enum Pattern {
        Skipped,
        Infeasible,
        Feasible(f64, Vec<f64>),
    }
    let results: Vec<Pattern> = (0..1usize << n)
        .into_par_iter()
        .map(|mask| {
            let contact = |i: usize| mask >> i & 1 == 1;
            let free: Vec<usize> = (0..n).filter(|&i| !contact(i)).collect();
            let mut u: Vec<f64> = (0..n).map(|i| if contact(i) { ph[i] } else { 0.0 }).collect();
            if !free.is_empty() {
                let k = free.len();
                let m = DMatrix::from_fn(k, k, |r, c| hess[free[r] * n + free[c]]);
                let rhs = DVector::from_iterator(
                    k,
                    free.iter().map(|&r| -q[r] - (0..n).filter(|&c| contact(c)).map(|c| hess[r * n + c] * ph[c]).sum::<f64>()),
                );
                let Some(ch) = m.cholesky() else { return Pattern::Skipped };
                let sol = ch.solve(&rhs);
                for (r, &i) in free.iter().enumerate() {
                    u[i] = sol[r];
                }
            }
            let above = free.iter().all(|&i| u[i] >= ph[i] - tol_u);
            let signs = (0..n).filter(|&i| contact(i)).all(|i| {
                let grad = (0..n).map(|c| hess[i * n + c] * u[c]).sum::<f64>() + q[i];
                grad >= -tol_l
            });
            if !(above && signs) {
                return Pattern::Infeasible;
            }
            match energy(&u) {
                Ok(e) => Pattern::Feasible(e, u),
                Err(_) => Pattern::Skipped,
            }
        })
        .collect();
    let skipped: Vec<usize> = results.iter().enumerate().filter(|(_, r)| matches!(r, Pattern::Skipped)).map(|(i, _)| i).collect();
    let feasible: Vec<(usize, f64)> = results
        .iter()
        .enumerate()
        .filter_map(|(i, r)| if let Pattern::Feasible(e, _) = r { Some((i, *e)) } else { None })
        .collect();
    let e_min = feasible.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    if !e_min.is_finite() {
        return Err(Error::Singular);
    }
    let tie = 1e-12 * e_min.abs().max(1e-300) + 1e-15;
    let (pattern, energy_best) = feasible
        .iter()
        .filter(|p| p.1 <= e_min + tie)
        .min_by_key(|p| (p.0.count_ones(), p.0))
        .copied()
        .expect("a feasible pattern exists");
    let Pattern::Feasible(_, u) = &results[pattern] else { unreachable!() };
    Ok(ActiveSetOutcome {
        report: OracleReport::new(energy_best, "active-set enumeration", phi.spacing(), 0.0)?,
        solution: template.with_values(u.clone())?,
        pattern,
        skipped,
        feasible: feasible.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SetExterior;
    use crate::solvers::{solve_fractional_obstacle, SolverConfig};

    fn line(h: f64, f: impl Fn(f64) -> f64) -> GraphFunction {
        GraphFunction::from_fn(1, 0.5, h, ExteriorSpec::Zero, |x| f(x[0])).unwrap()
    }

    #[test]
    fn active_set_trivial_cases() {
        let h = 1.0 / 8.0;
        let spec = KernelSpec::new(FractionalOrder::new(0.25).unwrap(), h).unwrap();
        let zero = line(h, |_| 0.0);
        let flat = exhaustive_active_set(&zero, &ExteriorSpec::Zero, &zero, &spec).unwrap();
        assert_eq!(flat.pattern, 0);
        assert!(flat.solution.values().iter().all(|v| v.abs() < 1e-14));
        let low = exhaustive_active_set(&line(h, |_| -50.0), &ExteriorSpec::Zero, &line(h, |_| 1.0), &spec).unwrap();
        assert_eq!(low.pattern, 0);
        assert!(low.solution.values().iter().all(|v| *v < 0.0));
    }

    #[test]
    fn active_set_agrees_with_the_solver() {
        let h = 1.0 / 8.0;
        let spec = KernelSpec::new(FractionalOrder::new(0.25).unwrap(), h).unwrap();
        let phi = line(h, |x| 0.3 - 2.0 * x * x);
        let f = line(h, |_| 0.0);
        let oracle = exhaustive_active_set(&phi, &ExteriorSpec::Zero, &f, &spec).unwrap();
        let config = SolverConfig { tol_kkt: 1e-12, ..SolverConfig::default() };
        let main = solve_fractional_obstacle(&Obstacle::graph(phi), &ExteriorSpec::Zero, &f, &spec, &config).unwrap();
        assert!((main.final_energy() - oracle.report.value).abs() < 1e-8);
        assert!(oracle.pattern != 0);
    }

    #[test]
    fn set_enumeration_cases() {
        let order = FractionalOrder::new(0.25).unwrap();
        let h = 0.125;
        let ext = SetExterior::half_space(&[0.0, 1.0], 0.0).unwrap();
        let frozen = IndicatorGrid::centered(2, 0.5, h, ext, |x| if x[1] < 0.0 { 1.0 } else { 0.0 }).unwrap();
        let window = Window::cube(2, 0.25);
        let empty = Obstacle::set(frozen.with_cells(vec![0.0; frozen.len()]).unwrap());
        let out = exhaustive_set_min(&empty, &frozen, &window, order).unwrap();
        assert_eq!(out.free_cells.len(), 16);
        assert_eq!(out.set.cells(), frozen.cells());
        let full = Obstacle::set(frozen.with_cells(vec![1.0; frozen.len()]).unwrap());
        let only = exhaustive_set_min(&full, &frozen, &window, order).unwrap();
        assert!(only.free_cells.is_empty());
        let big = Window::cube(2, 0.375);
        assert!(matches!(exhaustive_set_min(&empty, &frozen, &big, order), Err(Error::OracleRefusal(_))));
    }
}
