//! Acceptance criteria. Each test writes one `ACn PASS|FAIL` line to stderr,
//! uncaptured, and then asserts the criterion at its stated tolerance.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nlms::analysis::{
    almost_minimality_audit, euler_lagrange_residual, fit_detachment_exponent, holder_seminorm, linearization_modulus,
    regular_point_test, sample_pairs,
};
use nlms::cli::config::{Analysis, ExperimentConfig, Target};
use nlms::cli::run::{solve, Solved};
use nlms::cli::Param;
use nlms::domain::{ExteriorSpec, FractionalOrder, GraphFunction, IndicatorGrid, Obstacle, SetExterior};
use nlms::energy::{graph_area, graph_area_gradient, GraphSPerimeter, QuadraticModel, SetEnergy, Window};
use nlms::kernels::{fractional_curvature_graph_all, fractional_curvature_set, truncated_kernel_fE, KernelSpec};
use nlms::oracle::{exhaustive_active_set, exhaustive_set_min, fd_gradient_check};
use nlms::solvers::{solve_fractional_obstacle, solve_s_minimal_set, SolverConfig};

fn preset(name: &str) -> ExperimentConfig {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets").join(name);
    ExperimentConfig::load(&path).unwrap().0
}

fn at_spacing(mut config: ExperimentConfig, h: f64) -> ExperimentConfig {
    Param::H.apply(&mut config, h);
    config
}

fn report(id: usize, pass: bool, detail: String) {
    let line = format!("AC{id} {}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stderr().write_all(line.as_bytes()).unwrap();
}

fn spec(s: f64, h: f64) -> KernelSpec {
    KernelSpec::new(FractionalOrder::new(s).unwrap(), h).unwrap()
}

fn pair(solved: &Solved) -> (&GraphFunction, &GraphFunction) {
    solved.report.as_ref().unwrap().pair().unwrap()
}

#[test]
fn ac1_detachment_exponent() {
    let mut pass = true;
    let mut details = Vec::new();
    for tag in ["010", "025", "040"] {
        let config = preset(&format!("detachment_s{tag}"));
        let clock = Instant::now();
        let solved = solve(&config).unwrap();
        let elapsed = clock.elapsed().as_secs_f64();
        let r = solved.report.as_ref().unwrap();
        let u = r.graph().unwrap();
        let phi = solved.lower.as_ref().unwrap();
        let h = config.grid.spacing().unwrap();
        let Analysis::Detachment { window_cells: Some([a, b]) } = config.analyses[0] else { panic!("preset layout") };
        let target = FractionalOrder::new(config.s).unwrap().detachment_exponent();
        let points = &r.contact.as_ref().unwrap().boundary_indices;
        let slopes: Vec<f64> = points
            .iter()
            .map(|&p| fit_detachment_exponent(u, phi, p, Some((a * h, b * h))).map_or(f64::NAN, |f| f.slope))
            .collect();
        let ok = r.converged
            && !slopes.is_empty()
            && slopes.iter().all(|m| (m - target).abs() <= 0.1)
            && elapsed < 120.0;
        pass &= ok;
        details.push(format!("s={} slopes {:?} target {target:.2} in {elapsed:.1}s", config.s, slopes));
    }
    report(1, pass, details.join("; "));
    assert!(pass);
}

#[test]
fn ac2_two_membranes_split_regularity() {
    let clock = Instant::now();
    let base = preset("membranes_s025");
    let order = FractionalOrder::new(base.s).unwrap();
    let target = 1.0 + order.sbar();
    let mut seminorms = Vec::new();
    let mut slopes = Vec::new();
    let mut all_ok = true;
    for h in [2f64.powi(-8), 2f64.powi(-9)] {
        let config = at_spacing(base.clone(), h);
        let solved = solve(&config).unwrap();
        let (u, v) = pair(&solved);
        let contact = solved.report.as_ref().unwrap().contact.as_ref().unwrap();
        all_ok &= solved.report.as_ref().unwrap().converged;
        for &p in &contact.boundary_indices {
            let rp = regular_point_test(u, v, p, order, 0.1, None).unwrap();
            if rp.regular {
                let fit = fit_detachment_exponent(u, v, p, Some((4.0 * h, 32.0 * h))).unwrap();
                slopes.push(fit.slope);
            }
        }
        let Some(Analysis::Holder { derivative, beta, half_width, .. }) =
            config.analyses.iter().find(|a| matches!(a, Analysis::Holder { target: Target::V, .. }))
        else {
            panic!("preset layout")
        };
        seminorms.push(holder_seminorm(v, *derivative, *beta, &Window::cube(1, *half_width), 0).unwrap());
    }
    let ratio = (seminorms[1] / seminorms[0]).max(seminorms[0] / seminorms[1]);
    let elapsed = clock.elapsed().as_secs_f64();
    let pass = all_ok
        && !slopes.is_empty()
        && slopes.iter().all(|m| (m - target).abs() <= 0.15)
        && ratio <= 2.0
        && elapsed < 300.0;
    report(
        2,
        pass,
        format!("separation slopes {slopes:?} target {target:.2}; [v''] {seminorms:?} ratio {ratio:.3}; {elapsed:.1}s"),
    );
    assert!(pass);
}

#[test]
fn ac3_euler_lagrange_identity() {
    let base = preset("el_s025");
    let Some(Analysis::EulerLagrange { tol: Some(tol) }) = base.analyses.first().cloned() else { panic!("preset layout") };
    let mut maxima = Vec::new();
    let mut one_sided = true;
    for h in [2f64.powi(-8), 2f64.powi(-9)] {
        let config = at_spacing(base.clone(), h);
        let solved = solve(&config).unwrap();
        let (u, v) = pair(&solved);
        let contact = solved.report.as_ref().unwrap().contact.as_ref().unwrap();
        let el = euler_lagrange_residual(u, v, contact, &config.kernel().unwrap(), solved.forcing.as_ref(), tol).unwrap();
        one_sided &= el.one_sided_hold();
        maxima.push(el.max_residual);
    }
    let factor = maxima[0] / maxima[1];
    let pass = factor >= 2.0 && one_sided;
    report(
        3,
        pass,
        format!("max interior residual {:.3e} -> {:.3e}, factor {factor:.3} (need 2); one-sided checks at tol {tol:.4}: {one_sided}", maxima[0], maxima[1]),
    );
    assert!(pass);
}

fn random_set_instance(rng: &mut ChaCha8Rng) -> (Obstacle, IndicatorGrid, Window) {
    let h = 0.125;
    let angle: f64 = rng.random_range(-0.6..0.6);
    let normal = [angle.sin(), angle.cos()];
    let offset: f64 = rng.random_range(-0.12..0.12);
    let ext = SetExterior::half_space(&normal, offset).unwrap();
    let frozen = IndicatorGrid::centered(2, 0.5, h, ext.clone(), |x| {
        if normal[0] * x[0] + normal[1] * x[1] < offset {
            1.0
        } else {
            0.0
        }
    })
    .unwrap();
    let window = Window::cube(2, 0.25);
    let free: Vec<usize> = (0..frozen.len()).filter(|&i| window.contains(&frozen.cell_center(i))).collect();
    let count = rng.random_range(0..4);
    let mut cells = vec![0.0; frozen.len()];
    for _ in 0..count {
        cells[free[rng.random_range(0..free.len())]] = 1.0;
    }
    (Obstacle::set(frozen.with_cells(cells).unwrap()), frozen, window)
}

fn random_graph_instance(rng: &mut ChaCha8Rng, k: usize) -> (GraphFunction, GraphFunction, KernelSpec) {
    let (dim, radius, h) = if k % 2 == 0 { (1, 0.5, 1.0 / 16.0) } else { (2, 0.5, 0.25) };
    let height: f64 = rng.random_range(0.05..0.3);
    let curv: f64 = rng.random_range(0.5..3.0);
    let tilt: f64 = rng.random_range(-0.2..0.2);
    let noise: Vec<f64> = (0..64).map(|_| rng.random_range(-0.02..0.02)).collect();
    let phi = GraphFunction::from_fn(dim, radius, h, ExteriorSpec::Zero, |x| {
        let cell = x.iter().fold(0.0, |a, v| 8.0 * a + ((v + radius) / h).floor());
        height - curv * x.iter().map(|v| v * v).sum::<f64>() + tilt * x[0] + noise[cell as usize % 64]
    })
    .unwrap();
    let forcing: f64 = rng.random_range(-0.5..0.5);
    let f = phi.with_values(vec![forcing; phi.len()]).unwrap();
    let mut sp = spec(0.25, 1.0 / 16.0).without_truncation();
    sp.spacing = h;
    sp.near_field_split = h;
    (phi, f, sp)
}

#[test]
fn ac4_oracle_equivalence() {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let order = FractionalOrder::new(0.25).unwrap();
    let mut set_gaps = Vec::new();
    for _ in 0..10 {
        let (obstacle, frozen, window) = random_set_instance(&mut rng);
        let oracle = exhaustive_set_min(&obstacle, &frozen, &window, order).unwrap();
        let main = solve_s_minimal_set(&obstacle, &frozen, &window, order, &SolverConfig::default()).unwrap();
        assert!(oracle.free_cells.len() <= 16);
        set_gaps.push((main.final_energy() - oracle.report.value).abs());
    }
    let mut graph_gaps = Vec::new();
    for k in 0..10 {
        let (phi, f, sp) = random_graph_instance(&mut rng, k);
        assert!(phi.len() <= 16);
        let oracle = exhaustive_active_set(&phi, &ExteriorSpec::Zero, &f, &sp).unwrap();
        let config = SolverConfig { tol_kkt: 1e-12, ..SolverConfig::default() };
        let main = solve_fractional_obstacle(&Obstacle::graph(phi), &ExteriorSpec::Zero, &f, &sp, &config).unwrap();
        graph_gaps.push((main.final_energy() - oracle.report.value).abs());
    }
    let elapsed = clock.elapsed().as_secs_f64();
    let worst_set = set_gaps.iter().copied().fold(0.0, f64::max);
    let worst_graph = graph_gaps.iter().copied().fold(0.0, f64::max);
    let pass = worst_set <= 1e-6 && worst_graph <= 1e-8 && elapsed < 120.0;
    report(
        4,
        pass,
        format!("set energy gap max {worst_set:.2e} (tol 1e-6), graph energy gap max {worst_graph:.2e} (tol 1e-8), {elapsed:.1}s"),
    );
    assert!(pass);
}

fn lower_half(h: f64, half: f64, normal: [f64; 2]) -> IndicatorGrid {
    let ext = SetExterior::half_space(&normal, 0.0).unwrap();
    IndicatorGrid::centered(2, half, h, ext, |x| if normal[0] * x[0] + normal[1] * x[1] < 0.0 { 1.0 } else { 0.0 }).unwrap()
}

fn disc(h: f64, radius: f64) -> IndicatorGrid {
    IndicatorGrid::centered(2, 2.0 * radius, h, SetExterior::Complement, |x| {
        if x[0] * x[0] + x[1] * x[1] < radius * radius {
            1.0
        } else {
            0.0
        }
    })
    .unwrap()
}

#[test]
fn ac5_kernel_suite() {
    let s = 0.25;
    let h = 1.0 / 32.0;
    let sp = spec(s, h);
    let mut lines = Vec::new();
    let mut pass = true;

    let flat = lower_half(h, 1.0, [0.0, 1.0]);
    let mut half_space = 0.0f64;
    for x in [[0.0, 0.0], [0.37, 0.0], [-0.8, 0.0], [0.5, 0.0]] {
        half_space = half_space.max(fractional_curvature_set(&flat, &sp, &x).unwrap().abs());
    }
    let flat_graph = GraphFunction::from_fn(1, 1.0, h, ExteriorSpec::flat(1, 0.3), |_| 0.3).unwrap();
    let graph_k = fractional_curvature_graph_all(&flat_graph, &sp).unwrap();
    half_space = half_space.max(graph_k.iter().fold(0.0, |m, k| m.max(k.abs())));
    pass &= half_space <= 1e-3;
    lines.push(format!("half-space |K| max {half_space:.2e}"));

    let d = disc(h, 1.0);
    let k_in = fractional_curvature_set(&d, &sp, &[0.0, 1.0]).unwrap();
    let k_out = fractional_curvature_set(&d.complement(), &sp, &[0.0, 1.0]).unwrap();
    let bump = GraphFunction::from_fn(1, 1.0, h, ExteriorSpec::Zero, |x| 0.2 * (1.0 - x[0] * x[0]).powi(2)).unwrap();
    let neg = bump.with_values(bump.values().iter().map(|v| -v).collect()).unwrap();
    let kb = fractional_curvature_graph_all(&bump, &sp).unwrap();
    let kn = fractional_curvature_graph_all(&neg, &sp).unwrap();
    let graph_anti = kb.iter().zip(&kn).fold(0.0f64, |m, (a, b)| m.max((a + b).abs()));
    let anti = (k_in + k_out).abs().max(graph_anti);
    pass &= anti <= 1e-12;
    lines.push(format!("antisymmetry {anti:.2e}"));

    let radii = [0.5, 1.0, 2.0];
    let pts: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| {
            let k = fractional_curvature_set(&disc(r / 32.0, r), &spec(s, r / 32.0), &[0.0, r]).unwrap();
            (r.ln(), (-k).ln())
        })
        .collect();
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let slope = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    pass &= (slope + 2.0 * s).abs() <= 2e-2;
    lines.push(format!("scaling exponent {slope:.4} (target {})", -2.0 * s));

    let tilted = lower_half(h, 1.0, [0.3f64.sin(), 0.3f64.cos()]);
    let f0 = truncated_kernel_fE(&flat, &sp, &[0.2, 0.0]).unwrap().abs();
    let f1 = truncated_kernel_fE(&tilted, &sp, &[0.0, 0.0]).unwrap().abs();
    let fe = f0.max(f1);
    pass &= fe <= 1e-3;
    lines.push(format!("f_P(y) {fe:.2e}"));

    let steps = [1e-4, 5e-5, 2.5e-5, 1.25e-5];
    let mut worst = 0.0f64;
    let g = GraphFunction::from_fn(1, 0.5, 1.0 / 16.0, ExteriorSpec::Zero, |x| 0.1 * (3.0 * x[0]).sin() + 0.05).unwrap();
    let sg = spec(s, 1.0 / 16.0);
    let dir: Vec<f64> = (0..g.len()).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3 + 0.1).collect();
    let quad = QuadraticModel::new(&sg, &g).unwrap();
    let c = fd_gradient_check(&|x| quad.energy(x), &quad.gradient(g.values()).unwrap(), g.values(), &dir, &steps).unwrap();
    worst = worst.max(c.report.value);
    let per = GraphSPerimeter::new(&sg, &g).unwrap();
    let c = fd_gradient_check(&|x| per.energy(x), &per.gradient(g.values()).unwrap(), g.values(), &dir, &steps).unwrap();
    worst = worst.max(c.report.value);
    let area = |x: &[f64]| Ok(graph_area(&g.with_values(x.to_vec())?, None));
    let c = fd_gradient_check(&area, &graph_area_gradient(&g), g.values(), &dir, &steps).unwrap();
    worst = worst.max(c.report.value);
    let small = lower_half(0.125, 0.5, [0.3f64.sin(), 0.3f64.cos()]);
    let window = Window::cube(2, 0.25);
    let energy = SetEnergy::new(&small, FractionalOrder::new(s).unwrap(), &window).unwrap();
    let cells = energy.window_cells().to_vec();
    let base: Vec<f64> = small.cells().to_vec();
    let embed = |x: &[f64]| {
        let mut theta = base.clone();
        for (k, &i) in cells.iter().enumerate() {
            theta[i] = x[k];
        }
        small.with_cells(theta)
    };
    let x0: Vec<f64> = cells.iter().map(|&i| 0.3 + 0.4 * base[i]).collect();
    let sdir: Vec<f64> = (0..cells.len()).map(|k| ((k % 3) as f64 - 1.0) * 0.5 + 0.2).collect();
    let set_f = |x: &[f64]| energy.energy(&embed(x)?);
    let c = fd_gradient_check(&set_f, &energy.gradient(&embed(&x0).unwrap()).unwrap(), &x0, &sdir, &steps).unwrap();
    worst = worst.max(c.report.value);
    pass &= worst <= 1e-6;
    lines.push(format!("first-variation mismatch max {worst:.2e}"));

    report(5, pass, lines.join("; "));
    assert!(pass);
}

#[test]
fn ac6_linearization_modulus() {
    let base = preset("linearization_s025");
    let Some(Analysis::Linearization { beta, pairs, sample_radius, min_separation, seed }) = base.analyses.first().cloned()
    else {
        panic!("preset layout")
    };
    let h = base.grid.spacing().unwrap();
    let samples = sample_pairs(1, sample_radius, pairs, min_separation, seed.unwrap_or(base.seed));
    let mut fits = Vec::new();
    for spacing in [h, h / 2.0] {
        let config = at_spacing(base.clone(), spacing);
        let solved = solve(&config).unwrap();
        let u = solved.graph.as_ref().unwrap();
        fits.push(linearization_modulus(u, &config.kernel().unwrap(), beta, &samples).unwrap());
    }
    let bounded = fits.iter().all(|f| f.samples.iter().all(|(_, _, d, m)| *d <= f.c_hat * m * (1.0 + 1e-12)));
    let ratio = fits[1].c_hat / fits[0].c_hat;
    let pass = samples.len() >= 1000 && bounded && (ratio - 1.0).abs() <= 0.2;
    report(
        6,
        pass,
        format!("{} pairs, C_hat {:.5} at h, {:.5} at h/2, ratio {ratio:.4}", samples.len(), fits[0].c_hat, fits[1].c_hat),
    );
    assert!(pass);
}

#[test]
fn ac7_almost_minimality_audit() {
    let config = preset("audit_s025");
    let Some(Analysis::Audit { trials, r_min, r_max, half_width, z_range, seed }) = config.analyses.first().cloned() else {
        panic!("preset layout")
    };
    let solved = solve(&config).unwrap();
    let (u, v) = pair(&solved);
    let h = config.grid.spacing().unwrap();
    let nz = ((z_range[1] - z_range[0]) / h).round() as usize;
    let e = IndicatorGrid::subgraph(u, z_range[0], nz).unwrap();
    let f = IndicatorGrid::subgraph(v, z_range[0], nz).unwrap();
    let region = Window::new(vec![-half_width, z_range[0]], vec![half_width, z_range[1]]).unwrap();
    let order = config.order().unwrap();
    let record = almost_minimality_audit(&f, &e, order, trials, seed.unwrap_or(config.seed), (r_min, r_max), &region).unwrap();
    let n = 2.0;
    let scale_ok = record.trials.iter().all(|t| t.rhs <= record.c_hat * t.radius.powf(n - 2.0 * config.s) * (1.0 + 1e-12));
    let holds = record.trials.iter().all(|t| t.lhs <= t.rhs);
    let pass = record.trials.len() == 50 && record.violations == 0 && holds && scale_ok;
    report(
        7,
        pass,
        format!(
            "{} trials, {} violations, sharpest lhs/rhs {:.3e}, C_hat {:.4}",
            record.trials.len(),
            record.violations,
            record.sharpest_ratio,
            record.c_hat
        ),
    );
    assert!(pass);
}

fn preset_files() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets");
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .collect();
    files.sort();
    files
}

fn outputs(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().is_some_and(|n| n != "manifest.json") {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn ac8_determinism_across_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let mut differing = Vec::new();
    let mut csv_files = 0;
    let presets = preset_files();
    for path in &presets {
        let name = path.file_stem().unwrap().to_string_lossy().into_owned();
        let command = if name.starts_with("oracle_") { "oracle-compare" } else { "run" };
        let mut runs = Vec::new();
        for threads in ["1", "4"] {
            let out = tmp.path().join(format!("{name}_{threads}"));
            let status = Command::new(env!("CARGO_BIN_EXE_nlms"))
                .args([command, path.to_str().unwrap(), "--threads", threads, "--output-dir", out.to_str().unwrap()])
                .output()
                .unwrap()
                .status
                .code();
            runs.push((status, outputs(&out)));
        }
        csv_files += runs[0].1.iter().filter(|(n, _)| n.ends_with(".csv")).count();
        if runs[0] != runs[1] {
            differing.push(name);
        }
    }
    let pass = differing.is_empty() && csv_files > 0;
    report(
        8,
        pass,
        format!("{} presets rerun with 1 and 4 threads, {csv_files} CSV files compared, differing: {differing:?}", presets.len()),
    );
    assert!(pass);
}
