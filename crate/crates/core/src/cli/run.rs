use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

use super::config::{Analysis, ExperimentConfig, Problem, Target};
use crate::analysis::{
    almost_minimality_audit, csv_table, euler_lagrange_residual, fit_detachment_exponent, flatness_decay, holder_seminorm,
    linearization_modulus, num, regular_point_test, sample_pairs, Boundary, Forcing,
};
use crate::domain::{io, GraphFunction, IndicatorGrid, Obstacle};
use crate::energy::Window;
use crate::error::{Error, Result};
use crate::solvers::{solve_fractional_obstacle, solve_s_minimal_set, solve_two_membranes, MembraneProblem, SolveReport};

/// Files written under one output directory, in creation order.
#[derive(Debug)]
pub struct Artifacts {
    root: PathBuf,
    prefix: PathBuf,
    pub files: Vec<String>,
}

impl Artifacts {
    pub fn new(root: &Path) -> Result<Self> {
        std::fs::create_dir_all(root).map_err(|e| Error::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), prefix: PathBuf::new(), files: Vec::new() })
    }

    /// Same file list, rooted in a subdirectory.
    pub fn nested(&mut self, sub: &str) -> Result<Artifacts> {
        let prefix = self.prefix.join(sub);
        let dir = self.root.join(&prefix);
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Artifacts { root: self.root.clone(), prefix, files: Vec::new() })
    }

    pub fn absorb(&mut self, other: Artifacts) {
        self.files.extend(other.files);
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let rel = self.prefix.join(name);
        let path = self.root.join(&rel);
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.files.push(rel.to_string_lossy().replace('\\', "/"));
        Ok(())
    }

    pub fn root(&self) -> &Path {
        &self.root
    }
}

/// Everything a run produced besides its files.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub converged: bool,
    pub iterations: usize,
    pub final_energy: f64,
    pub kkt_residual: f64,
    pub metrics: BTreeMap<String, f64>,
    pub errors: Vec<String>,
    pub timings: BTreeMap<String, f64>,
}

impl RunOutput {
    pub fn succeeded(&self) -> bool {
        self.converged && self.errors.is_empty()
    }
}

/// Inputs and solution of one experiment.
pub struct Solved {
    pub report: Option<SolveReport>,
    pub lower: Option<GraphFunction>,
    pub graph: Option<GraphFunction>,
    pub forcing: Option<Forcing>,
}

/// Builds the problem from the config and solves it.
pub fn solve(config: &ExperimentConfig) -> Result<Solved> {
    let grid = &config.grid;
    let base = &config.base_dir;
    let dim = grid.dim;
    let spec = config.kernel()?;
    let zero = || -> Result<GraphFunction> {
        GraphFunction::from_fn(dim, grid.radius, grid.spacing()?, crate::domain::ExteriorSpec::Zero, |_| 0.0)
    };
    let field = |p: &Option<super::config::Profile>, scale: f64| -> Result<GraphFunction> {
        match p {
            Some(p) => p.build(grid, crate::domain::ExteriorSpec::Zero, scale, base),
            None => zero(),
        }
    };
    match config.problem {
        Problem::FractionalObstacle => {
            let phi = field(&config.obstacle, config.scale.obstacle)?;
            let f = field(&config.forcing, config.scale.forcing)?;
            let exterior = config.exterior.spec(dim)?;
            let report = solve_fractional_obstacle(&Obstacle::graph(phi.clone()), &exterior, &f, &spec, &config.solver)?;
            Ok(Solved { report: Some(report), lower: Some(phi), graph: None, forcing: None })
        }
        Problem::TwoMembranes => {
            let f = field(&config.forcing, config.scale.forcing)?;
            let g = field(&config.forcing_v, config.scale.forcing)?;
            let forcing = Forcing::from_graphs(&f, &g)?;
            let problem = MembraneProblem::new(config.exterior.spec(dim)?, config.exterior_v.spec(dim)?, f, g)?;
            let report = solve_two_membranes(&problem, &spec, &config.solver)?;
            Ok(Solved { report: Some(report), lower: None, graph: None, forcing: Some(forcing) })
        }
        Problem::SMinimalSet => {
            let set = config.set.as_ref().ok_or_else(|| Error::Config("missing [set]".into()))?;
            let rule = set.exterior.rule()?;
            let frozen = set.frozen.build(grid, rule.clone(), base)?;
            let obstacle = Obstacle::set(set.obstacle.build(grid, rule, base)?);
            let window = Window::cube(dim, set.window);
            let report = solve_s_minimal_set(&obstacle, &frozen, &window, config.order()?, &config.solver)?;
            Ok(Solved { report: Some(report), lower: None, graph: None, forcing: None })
        }
        Problem::GraphAnalysis => {
            let p = config.graph.as_ref().ok_or_else(|| Error::Config("missing graph".into()))?;
            let graph = p.build(grid, config.exterior.spec(dim)?, 1.0, base)?;
            Ok(Solved { report: None, lower: None, graph: Some(graph), forcing: None })
        }
    }
}

fn report_json(config: &ExperimentConfig, solved: &Solved, out: &mut Artifacts) -> Result<()> {
    let mut payload = BTreeMap::new();
    if let Some(phi) = &solved.lower {
        out.write("phi.grid", &io::graph_to_string(phi))?;
        payload.insert("phi", "phi.grid");
    }
    if let Some(g) = &solved.graph {
        out.write("graph.grid", &io::graph_to_string(g))?;
        payload.insert("graph", "graph.grid");
    }
    let mut value = json!({ "problem": config.problem, "s": config.s, "spacing": config.grid.spacing()? });
    if let Some(r) = &solved.report {
        if let Some(u) = r.graph() {
            out.write("u.grid", &io::graph_to_string(u))?;
            payload.insert("u", "u.grid");
        }
        if let Some((u, v)) = r.pair() {
            out.write("u.grid", &io::graph_to_string(u))?;
            out.write("v.grid", &io::graph_to_string(v))?;
            payload.insert("u", "u.grid");
            payload.insert("v", "v.grid");
        }
        if let Some(e) = r.set() {
            out.write("set.grid", &io::indicator_to_string(e))?;
            payload.insert("set", "set.grid");
        }
        value["converged"] = json!(r.converged);
        value["iterations"] = json!(r.iterations);
        value["kkt_residual"] = json!(r.kkt_residual);
        value["final_energy"] = json!(r.final_energy());
        value["energy_trace"] = json!(r.energy_trace);
        value["contact"] = json!(r.contact);
        value["flags"] = json!(r.flags);
    }
    value["solution"] = json!(payload);
    let text = serde_json::to_string(&value).map_err(|e| Error::input(e.to_string()))?;
    out.write("report.json", &(text + "\n"))
}

fn coordinate_header(dim: usize) -> Vec<String> {
    (0..dim).map(|a| format!("x_{a}")).collect()
}

fn with_header<'a>(lead: &[&'a str], coords: &'a [String], tail: &[&'a str]) -> Vec<&'a str> {
    lead.iter().copied().chain(coords.iter().map(String::as_str)).chain(tail.iter().copied()).collect()
}

/// Runs one analysis and returns its scalar metrics.
fn analyze(
    config: &ExperimentConfig,
    solved: &Solved,
    analysis: &Analysis,
    out: &mut Artifacts,
) -> Result<BTreeMap<String, f64>> {
    let spec = config.kernel()?;
    let order = config.order()?;
    let h = spec.spacing;
    let report = solved.report.as_ref();
    let contact = || {
        report
            .and_then(|r| r.contact.as_ref())
            .ok_or_else(|| Error::Config("analysis needs a graph contact set".into()))
    };
    let pair = || report.and_then(|r| r.pair()).ok_or_else(|| Error::Config("analysis needs a membrane pair".into()));
    let graph = || -> Result<&GraphFunction> {
        report
            .and_then(|r| r.graph().or(r.pair().map(|p| p.0)))
            .or(solved.graph.as_ref())
            .ok_or_else(|| Error::Config("analysis needs a graph".into()))
    };
    let seed_of = |s: &Option<u64>| s.unwrap_or(config.seed);
    let mut metrics = BTreeMap::new();
    match analysis {
        Analysis::Detachment { window_cells } => {
            let (u, lower) = match (report.and_then(|r| r.pair()), &solved.lower) {
                (Some((u, v)), _) => (u, v),
                (None, Some(phi)) => (graph()?, phi),
                _ => return Err(Error::Config("detachment needs an obstacle or a membrane pair".into())),
            };
            let window = window_cells.map(|[a, b]| (a * h, b * h));
            let coords = coordinate_header(u.dim());
            let mut rows = Vec::new();
            let mut profile = Vec::new();
            let mut slopes = Vec::new();
            for &b in &contact()?.boundary_indices {
                let x: Vec<String> = u.center(b).iter().map(|v| num(*v)).collect();
                let mut row = vec![b.to_string()];
                row.extend(x);
                match fit_detachment_exponent(u, lower, b, window) {
                    Ok(fit) => {
                        slopes.push(fit.slope);
                        row.extend([
                            num(fit.slope),
                            num(fit.intercept),
                            num(fit.r_squared),
                            num(fit.window.0),
                            num(fit.window.1),
                            fit.flag.clone().unwrap_or_default(),
                        ]);
                        for (r, w) in fit.radii.iter().zip(&fit.values) {
                            profile.push(vec![b.to_string(), num(*r), num(*w), fit.in_window(*r).to_string()]);
                        }
                    }
                    Err(e) => row.extend(["NaN".into(), "NaN".into(), "NaN".into(), "NaN".into(), "NaN".into(), e.to_string()]),
                }
                rows.push(row);
            }
            let header = with_header(&["cell"], &coords, &["slope", "intercept", "r_squared", "window_lo", "window_hi", "flag"]);
            out.write("detachment.csv", &csv_table(&header, &rows)?)?;
            out.write("detachment_profiles.csv", &csv_table(&["cell", "radius", "value", "in_window"], &profile)?)?;
            if slopes.is_empty() {
                return Err(Error::Resolution("no contact boundary point admits a detachment fit".into()));
            }
            metrics.insert("detachment_points".into(), slopes.len() as f64);
            metrics.insert("detachment_slope_min".into(), slopes.iter().copied().fold(f64::INFINITY, f64::min));
            metrics.insert("detachment_slope_max".into(), slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max));
        }
        Analysis::RegularPoint { threshold } => {
            let (u, v) = pair()?;
            let coords = coordinate_header(u.dim());
            let mut rows = Vec::new();
            let mut regular = 0usize;
            for &b in &contact()?.boundary_indices {
                let rp = regular_point_test(u, v, b, order, *threshold, None)?;
                regular += rp.regular as usize;
                let mut row = vec![b.to_string()];
                row.extend(u.center(b).iter().map(|v| num(*v)));
                row.extend([rp.regular.to_string(), num(rp.score), num(rp.normalized), num(rp.threshold)]);
                rows.push(row);
            }
            let header = with_header(&["cell"], &coords, &["regular", "score", "normalized", "threshold"]);
            out.write("regular_points.csv", &csv_table(&header, &rows)?)?;
            metrics.insert("regular_points".into(), regular as f64);
            metrics.insert("boundary_points".into(), rows.len() as f64);
        }
        Analysis::EulerLagrange { tol } => {
            let (u, v) = pair()?;
            let tol = tol.unwrap_or_else(|| 20.0 * h.powf(1.0 - 2.0 * config.s));
            let el = euler_lagrange_residual(u, v, contact()?, &spec, solved.forcing.as_ref(), tol)?;
            out.write("el_residual.csv", &el.to_csv(u, contact()?)?)?;
            let summary = [
                ("tol", el.tol),
                ("max_residual", el.max_residual),
                ("kappa_excess", el.kappa_excess),
                ("curvature_excess", el.curvature_excess),
                ("combined_excess", el.combined_excess),
                ("free_residual", el.free_residual),
                ("interior_cells", el.cells.len() as f64),
                ("audited_cells", el.audited.len() as f64),
                ("one_sided_hold", el.one_sided_hold() as u8 as f64),
            ];
            let rows: Vec<Vec<String>> = summary.iter().map(|(k, v)| vec![k.to_string(), num(*v)]).collect();
            out.write("el_summary.csv", &csv_table(&["quantity", "value"], &rows)?)?;
            for (k, v) in summary {
                metrics.insert(format!("el_{k}"), v);
            }
        }
        Analysis::Holder { target, derivative, beta, half_width, seed } => {
            let w = match target {
                Target::U => graph()?,
                Target::V => pair()?.1,
            };
            let region = Window::cube(w.dim(), *half_width);
            let value = holder_seminorm(w, *derivative, *beta, &region, seed_of(seed))?;
            let name = if *target == Target::U { "u" } else { "v" };
            let rows = vec![vec![name.to_string(), derivative.to_string(), num(*beta), num(*half_width), num(value)]];
            out.write(
                &format!("holder_{name}_{derivative}.csv"),
                &csv_table(&["target", "derivative", "beta", "half_width", "seminorm"], &rows)?,
            )?;
            metrics.insert(format!("holder_{name}_{derivative}"), value);
        }
        Analysis::Linearization { beta, pairs, sample_radius, min_separation, seed } => {
            let u = graph()?;
            let samples = sample_pairs(u.dim(), *sample_radius, *pairs, *min_separation, seed_of(seed));
            let fit = linearization_modulus(u, &spec, *beta, &samples)?;
            out.write("modulus.csv", &fit.to_csv()?)?;
            metrics.insert("modulus_c_hat".into(), fit.c_hat);
            metrics.insert("modulus_pairs".into(), fit.samples.len() as f64);
        }
        Analysis::Audit { trials, r_min, r_max, half_width, z_range, seed } => {
            let (u, v) = pair()?;
            let nz = ((z_range[1] - z_range[0]) / h).round() as usize;
            let e = IndicatorGrid::subgraph(u, z_range[0], nz)?;
            let f = IndicatorGrid::subgraph(v, z_range[0], nz)?;
            let mut lower = vec![-half_width; u.dim()];
            let mut upper = vec![*half_width; u.dim()];
            lower.push(z_range[0]);
            upper.push(z_range[1]);
            let region = Window::new(lower, upper)?;
            let record = almost_minimality_audit(&f, &e, order, *trials, seed_of(seed), (*r_min, *r_max), &region)?;
            out.write("audit.csv", &record.to_csv()?)?;
            metrics.insert("audit_trials".into(), record.trials.len() as f64);
            metrics.insert("audit_violations".into(), record.violations as f64);
            metrics.insert("audit_sharpest_ratio".into(), record.sharpest_ratio);
            metrics.insert("audit_c_hat".into(), record.c_hat);
        }
        Analysis::Flatness { point, r_max } => {
            let boundary = match (report.and_then(|r| r.set()), graph()) {
                (Some(e), _) => Boundary::Set(e),
                (None, Ok(u)) => Boundary::Graph(u),
                (None, Err(e)) => return Err(e),
            };
            let fit = flatness_decay(boundary, point, *r_max)?;
            let rows: Vec<Vec<String>> = fit
                .fit
                .radii
                .iter()
                .zip(&fit.fit.values)
                .zip(&fit.angles)
                .map(|((r, w), a)| vec![num(*r), num(*w), num(*a), fit.fit.in_window(*r).to_string()])
                .collect();
            out.write("flatness.csv", &csv_table(&["radius", "width", "normal_angle", "in_window"], &rows)?)?;
            metrics.insert("flatness_slope".into(), fit.fit.slope);
        }
    }
    Ok(metrics)
}

/// Solves, writes the report and runs every configured analysis.
pub fn execute(config: &ExperimentConfig, out: &mut Artifacts) -> Result<RunOutput> {
    let mut output = RunOutput::default();
    let clock = Instant::now();
    let solved = solve(config)?;
    output.timings.insert("solve".into(), clock.elapsed().as_secs_f64());
    match &solved.report {
        Some(r) => {
            output.converged = r.converged;
            output.iterations = r.iterations;
            output.final_energy = r.final_energy();
            output.kkt_residual = r.kkt_residual;
            if !r.converged {
                output.errors.push(format!("solver did not converge in {} iterations", r.iterations));
            }
        }
        None => {
            output.converged = true;
            output.final_energy = f64::NAN;
            output.kkt_residual = f64::NAN;
        }
    }
    report_json(config, &solved, out)?;
    for (k, analysis) in config.analyses.iter().enumerate() {
        let clock = Instant::now();
        let name = serde_json::to_value(analysis)
            .ok()
            .and_then(|v| v["kind"].as_str().map(str::to_string))
            .unwrap_or_default();
        match analyze(config, &solved, analysis, out) {
            Ok(m) => output.metrics.extend(m),
            Err(e) => output.errors.push(format!("analysis {name}: {e}")),
        }
        output.timings.insert(format!("analysis_{k}_{name}"), clock.elapsed().as_secs_f64());
    }
    Ok(output)
}
