use super::config::{ExperimentConfig, Problem};
use super::run::{solve, Artifacts};
use crate::analysis::{csv_table, num};
use crate::domain::{ExteriorSpec, GraphFunction, Obstacle};
use crate::energy::Window;
use crate::error::{Error, Result};
use crate::oracle::{exhaustive_active_set, exhaustive_set_min, OracleReport, Verdict};

/// Energy tolerance of the set comparison.
pub const SET_TOL: f64 = 1e-6;
/// Energy tolerance of the graph comparison.
pub const GRAPH_TOL: f64 = 1e-8;
/// Cellwise tolerance on the graph minimizer.
pub const GRAPH_SOLUTION_TOL: f64 = 1e-6;

pub struct Row {
    pub quantity: &'static str,
    pub main: f64,
    pub oracle: f64,
    pub tolerance: f64,
    pub oracle_error: f64,
    pub verdict: Verdict,
}

fn energy_row(report: &OracleReport, main: f64, tol: f64) -> Row {
    Row {
        quantity: "energy",
        main,
        oracle: report.value,
        tolerance: tol,
        oracle_error: report.estimated_error,
        verdict: report.verdict(main, tol),
    }
}

fn agreement_row(quantity: &'static str, mismatch: f64, tol: f64) -> Row {
    Row {
        quantity,
        main: mismatch,
        oracle: 0.0,
        tolerance: tol,
        oracle_error: 0.0,
        verdict: if mismatch <= tol { Verdict::Pass } else { Verdict::Fail },
    }
}

/// Runs the main path and the exhaustive oracle of the configured problem.
pub fn oracle_compare(config: &ExperimentConfig, out: &mut Artifacts) -> Result<Vec<Row>> {
    let rows = match config.problem {
        Problem::SMinimalSet => {
            let set = config.set.as_ref().ok_or_else(|| Error::Config("missing [set]".into()))?;
            let rule = set.exterior.rule()?;
            let frozen = set.frozen.build(&config.grid, rule.clone(), &config.base_dir)?;
            let obstacle = Obstacle::set(set.obstacle.build(&config.grid, rule, &config.base_dir)?);
            let window = Window::cube(config.grid.dim, set.window);
            let oracle = exhaustive_set_min(&obstacle, &frozen, &window, config.order()?)?;
            let main = solve(config)?.report.expect("set problems produce a report");
            let e = main.set().expect("set solver returns a set");
            let differing = e.cells().iter().zip(oracle.set.cells()).filter(|(a, b)| (*a - *b).abs() > 0.5).count();
            vec![
                energy_row(&oracle.report, main.final_energy(), SET_TOL),
                agreement_row("minimizer_cells_differing", differing as f64, 0.0),
            ]
        }
        Problem::FractionalObstacle => {
            let phi = config
                .obstacle
                .as_ref()
                .ok_or_else(|| Error::Config("missing obstacle".into()))?
                .build(&config.grid, ExteriorSpec::Zero, config.scale.obstacle, &config.base_dir)?;
            let f = match &config.forcing {
                Some(p) => p.build(&config.grid, ExteriorSpec::Zero, config.scale.forcing, &config.base_dir)?,
                None => phi.with_values(vec![0.0; phi.len()])?,
            };
            let oracle = exhaustive_active_set(&phi, &config.exterior.spec(config.grid.dim)?, &f, &config.kernel()?)?;
            let main = solve(config)?.report.expect("obstacle problems produce a report");
            let u: &GraphFunction = main.graph().expect("obstacle solver returns a graph");
            let gap = u
                .values()
                .iter()
                .zip(oracle.solution.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            vec![
                energy_row(&oracle.report, main.final_energy(), GRAPH_TOL),
                agreement_row("solution_max_difference", gap, GRAPH_SOLUTION_TOL),
            ]
        }
        p => return Err(Error::Config(format!("no exhaustive oracle for problem {p:?}"))),
    };
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.quantity.to_string(),
                num(r.main),
                num(r.oracle),
                num((r.main - r.oracle).abs()),
                num(r.tolerance),
                num(r.oracle_error),
                r.verdict.to_string(),
            ]
        })
        .collect();
    let header = ["quantity", "main", "oracle", "abs_difference", "tolerance", "oracle_error", "verdict"];
    out.write("oracle_compare.csv", &csv_table(&header, &table)?)?;
    Ok(rows)
}
