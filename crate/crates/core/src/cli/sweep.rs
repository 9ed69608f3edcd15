use std::collections::BTreeSet;

use clap::ValueEnum;

use super::config::ExperimentConfig;
use super::run::{execute, Artifacts, RunOutput};
use crate::analysis::{csv_table, num};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Param {
    S,
    H,
    Forcing,
    Obstacle,
}

impl Param {
    fn name(self) -> &'static str {
        match self {
            Param::S => "s",
            Param::H => "h",
            Param::Forcing => "forcing",
            Param::Obstacle => "obstacle",
        }
    }

    pub fn apply(self, config: &mut ExperimentConfig, value: f64) {
        match self {
            Param::S => config.s = value,
            Param::H => {
                config.grid.spacing = Some(value);
                config.grid.level = None;
            }
            Param::Forcing => config.scale.forcing = value,
            Param::Obstacle => config.scale.obstacle = value,
        }
    }
}

pub struct SweepRow {
    pub value: f64,
    pub outcome: Result<RunOutput>,
}

impl SweepRow {
    pub fn failed(&self) -> bool {
        !self.outcome.as_ref().is_ok_and(RunOutput::succeeded)
    }
}

/// Runs the experiment once per value, each in its own subdirectory, and
/// writes `sweep.csv` with one row per value.
pub fn sweep(base: &ExperimentConfig, param: Param, values: &[f64], out: &mut Artifacts) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::input("sweep needs at least one value"));
    }
    let mut rows = Vec::new();
    for (k, &value) in values.iter().enumerate() {
        let mut config = base.clone();
        param.apply(&mut config, value);
        let mut sub = out.nested(&format!("{}_{k:02}", param.name()))?;
        let outcome = config.validate().and_then(|_| execute(&config, &mut sub));
        out.absorb(sub);
        rows.push(SweepRow { value, outcome });
    }
    let keys: BTreeSet<String> =
        rows.iter().filter_map(|r| r.outcome.as_ref().ok()).flat_map(|o| o.metrics.keys().cloned()).collect();
    let mut header: Vec<String> = [param.name(), "status", "converged", "iterations", "final_energy", "kkt_residual"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend(keys.iter().cloned());
    header.push("error".into());
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut line = vec![num(r.value)];
            match &r.outcome {
                Ok(o) => {
                    line.push(if o.succeeded() { "ok" } else { "failed" }.into());
                    line.extend([o.converged.to_string(), o.iterations.to_string(), num(o.final_energy), num(o.kkt_residual)]);
                    line.extend(keys.iter().map(|k| o.metrics.get(k).map_or(String::new(), |v| num(*v))));
                    line.push(o.errors.join("; "));
                }
                Err(e) => {
                    line.extend(["failed".into(), "false".into(), String::new(), String::new(), String::new()]);
                    line.extend(keys.iter().map(|_| String::new()));
                    line.push(e.to_string());
                }
            }
            line
        })
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write("sweep.csv", &csv_table(&header, &table)?)?;
    Ok(rows)
}
