use proptest::prelude::*;

use nlms::analysis::{fit_detachment_exponent, regular_point_test};
use nlms::domain::{ExteriorSpec, FractionalOrder, GraphFunction, IndicatorGrid, Obstacle, SetExterior};
use nlms::energy::{SetEnergy, Window};
use nlms::kernels::{fractional_curvature_set, KernelSpec};
use nlms::oracle::exhaustive_active_set;
use nlms::solvers::{solve_fractional_obstacle, SolverConfig};

fn order() -> FractionalOrder {
    FractionalOrder::new(0.25).unwrap()
}

fn lower_half(h: f64, half: f64, angle: f64, offset: f64) -> (IndicatorGrid, [f64; 2]) {
    let normal = [angle.sin(), angle.cos()];
    let ext = SetExterior::half_space(&normal, offset).unwrap();
    let grid = IndicatorGrid::centered(2, half, h, ext, |x| {
        if normal[0] * x[0] + normal[1] * x[1] < offset {
            1.0
        } else {
            0.0
        }
    })
    .unwrap();
    (grid, normal)
}

fn window_mask(grid: &IndicatorGrid, window: &Window, bits: u16) -> Vec<f64> {
    let mut cells = grid.cells().to_vec();
    let inside: Vec<usize> = (0..grid.len()).filter(|&i| window.contains(&grid.cell_center(i))).collect();
    for (k, &i) in inside.iter().enumerate() {
        cells[i] = f64::from(bits >> (k % 16) & 1);
    }
    cells
}

fn parabola(height: f64, curvature: f64) -> GraphFunction {
    GraphFunction::from_fn(1, 0.5, 1.0 / 16.0, ExteriorSpec::Zero, |x| height - curvature * x[0] * x[0]).unwrap()
}

fn obstacle_solve(phi: &GraphFunction) -> GraphFunction {
    let spec = KernelSpec::new(order(), phi.spacing()).unwrap();
    let f = phi.with_values(vec![0.0; phi.len()]).unwrap();
    let config = SolverConfig { tol_kkt: 1e-12, ..SolverConfig::default() };
    let report = solve_fractional_obstacle(&Obstacle::graph(phi.clone()), &ExteriorSpec::Zero, &f, &spec, &config).unwrap();
    assert!(report.converged);
    assert!(report.energy_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    report.graph().unwrap().clone()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn interpolation_reproduces_affine_data(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, px in 0.0f64..1.0, py in 0.0f64..1.0) {
        let h = 0.125;
        let u = GraphFunction::from_fn(2, 1.0, h, ExteriorSpec::Zero, |x| a + b * x[0] + c * x[1]).unwrap();
        let lo = -1.0 + 0.5 * h;
        let span = 2.0 - h;
        let p = [lo + px * span, lo + py * span];
        let want = a + b * p[0] + c * p[1];
        prop_assert!((u.evaluate(&p).unwrap() - want).abs() <= 1e-13 * (1.0 + want.abs()));
    }

    #[test]
    fn set_energy_is_nonnegative_and_submodular(angle in -0.6f64..0.6, offset in -0.1f64..0.1, a in any::<u16>(), b in any::<u16>()) {
        let (frozen, _) = lower_half(0.125, 0.5, angle, offset);
        let window = Window::cube(2, 0.25);
        let energy = SetEnergy::new(&frozen, order(), &window).unwrap();
        let e = frozen.with_cells(window_mask(&frozen, &window, a)).unwrap();
        let f = frozen.with_cells(window_mask(&frozen, &window, b)).unwrap();
        let meet = e.with_cells(e.cells().iter().zip(f.cells()).map(|(x, y)| x.min(*y)).collect()).unwrap();
        let join = e.union(&f).unwrap();
        let (pe, pf) = (energy.energy(&e).unwrap(), energy.energy(&f).unwrap());
        let (pm, pj) = (energy.energy(&meet).unwrap(), energy.energy(&join).unwrap());
        prop_assert!(pe >= 0.0 && pf >= 0.0 && pm >= 0.0 && pj >= 0.0);
        prop_assert!(pj + pm <= pe + pf + 1e-12 * (pe + pf));
    }

    #[test]
    fn set_energy_is_affine_in_each_cell(bits in any::<u16>(), k in 0usize..16, t in 0.0f64..1.0) {
        let (frozen, _) = lower_half(0.125, 0.5, 0.2, 0.03);
        let window = Window::cube(2, 0.25);
        let energy = SetEnergy::new(&frozen, order(), &window).unwrap();
        let base = window_mask(&frozen, &window, bits);
        let cell = energy.window_cells()[k];
        let at = |v: f64| {
            let mut c = base.clone();
            c[cell] = v;
            energy.energy(&frozen.with_cells(c).unwrap()).unwrap()
        };
        let (e0, e1, et) = (at(0.0), at(1.0), at(t));
        prop_assert!(et <= e0.max(e1) + 1e-12 * e0.abs().max(e1.abs()));
        prop_assert!((et - ((1.0 - t) * e0 + t * e1)).abs() <= 1e-12 * e0.abs().max(e1.abs()));
    }

    #[test]
    fn detachment_fit_ignores_common_constants(c in -5.0f64..5.0, a in -0.2f64..0.2, p in 1.3f64..2.2) {
        let h = 1.0 / 128.0;
        let phi = GraphFunction::from_fn(1, 1.0, h, ExteriorSpec::Zero, |_| 0.0).unwrap();
        let u = phi.with_values((0..phi.len()).map(|i| (phi.center(i)[0] - a).max(0.0).powf(p)).collect()).unwrap();
        let x0 = (0..u.len()).rev().find(|&i| u.values()[i] == 0.0).unwrap();
        let shift = |g: &GraphFunction| g.with_values(g.values().iter().map(|v| v + c).collect()).unwrap();
        let base = fit_detachment_exponent(&u, &phi, x0, Some((4.0 * h, 32.0 * h))).unwrap();
        let moved = fit_detachment_exponent(&shift(&u), &shift(&phi), x0, Some((4.0 * h, 32.0 * h))).unwrap();
        prop_assert!((base.slope - moved.slope).abs() <= 1e-9);
    }

    #[test]
    fn regular_point_score_is_linear_in_the_gap(lambda in 0.1f64..10.0, a in -0.2f64..0.2) {
        let h = 1.0 / 128.0;
        let v = GraphFunction::from_fn(1, 1.0, h, ExteriorSpec::Zero, |x| 0.1 * x[0]).unwrap();
        let gap: Vec<f64> = (0..v.len()).map(|i| (v.center(i)[0] - a).max(0.0).powf(1.75)).collect();
        let u = |l: f64| v.with_values(v.values().iter().zip(&gap).map(|(b, g)| b + l * g).collect()).unwrap();
        let x0 = (0..v.len()).rev().find(|&i| gap[i] == 0.0).unwrap();
        let one = regular_point_test(&u(1.0), &v, x0, order(), 0.1, None).unwrap();
        let scaled = regular_point_test(&u(lambda), &v, x0, order(), 0.1, None).unwrap();
        prop_assert!((scaled.score - lambda * one.score).abs() <= 1e-9 * lambda * one.score);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn curvature_is_antisymmetric_and_monotone(bits in any::<u32>(), angle in -0.5f64..0.5) {
        let h = 1.0 / 16.0;
        let (b, normal) = lower_half(h, 0.5, angle, 0.0);
        let spec = KernelSpec::new(order(), h).unwrap();
        let x = [0.0, 0.0];
        let cells: Vec<f64> = b
            .cells()
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                let y = b.cell_center(i);
                let depth = -(normal[0] * y[0] + normal[1] * y[1]);
                if depth > 2.0 * h && bits >> (i % 32) & 1 == 1 { 0.0 } else { c }
            })
            .collect();
        let a = b.with_cells(cells).unwrap();
        let (ka, kb) = (fractional_curvature_set(&a, &spec, &x).unwrap(), fractional_curvature_set(&b, &spec, &x).unwrap());
        prop_assert!(ka <= kb + 1e-12 * kb.abs().max(1.0));
        let kc = fractional_curvature_set(&a.complement(), &spec, &x).unwrap();
        prop_assert!((ka + kc).abs() <= 1e-12 * ka.abs().max(1.0));
    }

    #[test]
    fn obstacle_solutions_are_feasible_and_ordered(height in 0.05f64..0.4, curvature in 0.5f64..4.0, lift in 0.0f64..0.1, center in -0.3f64..0.3) {
        let phi = parabola(height, curvature);
        let raised = phi
            .with_values(phi.values().iter().enumerate().map(|(i, v)| {
                let d = phi.center(i)[0] - center;
                v + lift * (1.0 - 16.0 * d * d).max(0.0)
            }).collect())
            .unwrap();
        let low = obstacle_solve(&phi);
        let high = obstacle_solve(&raised);
        prop_assert!(low.values().iter().zip(phi.values()).all(|(u, p)| u >= p));
        prop_assert!(high.values().iter().zip(raised.values()).all(|(u, p)| u >= p));
        prop_assert!(high.values().iter().zip(low.values()).all(|(a, b)| *a >= b - 1e-9));
        let again = obstacle_solve(&phi);
        prop_assert_eq!(again.values(), low.values());
    }

    #[test]
    fn active_set_oracle_is_deterministic(height in 0.05f64..0.3, curvature in 0.5f64..3.0) {
        let phi = GraphFunction::from_fn(1, 0.5, 0.125, ExteriorSpec::Zero, |x| height - curvature * x[0] * x[0]).unwrap();
        let f = phi.with_values(vec![0.0; phi.len()]).unwrap();
        let spec = KernelSpec::new(order(), 0.125).unwrap();
        let first = exhaustive_active_set(&phi, &ExteriorSpec::Zero, &f, &spec).unwrap();
        let second = exhaustive_active_set(&phi, &ExteriorSpec::Zero, &f, &spec).unwrap();
        prop_assert_eq!(&first.report, &second.report);
        prop_assert_eq!(first.solution.values(), second.solution.values());
        prop_assert_eq!(first.pattern, second.pattern);
    }
}
