//! Constrained minimizers for the graph obstacle problem, the two-membranes
//! problem and the set obstacle problem for the s-perimeter.

mod bound;
mod membranes;
mod obstacle;
mod sets;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::domain::{ContactSet, GraphFunction, IndicatorGrid};
use crate::error::{Error, Result};

pub use membranes::{solve_two_membranes, MembraneProblem};
pub use obstacle::{initial_blend, solve_fractional_obstacle};
pub use sets::solve_s_minimal_set;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepRule {
    FixedStep { tau: f64 },
    BacktrackingArmijo { c1: f64, shrink: f64 },
}

/// Nonlocal energy used by the graph solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SolverMode {
    #[default]
    Quadratic,
    ExactSet,
}

/// Search direction: projected Newton on the free variables, or the plain
/// projected gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    #[default]
    ProjectedNewton,
    ProjectedGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub max_iters: usize,
    /// Relative energy decrease below which iteration stops.
    pub tol_energy: f64,
    /// Complementarity residual at which iteration stops successfully.
    pub tol_kkt: f64,
    pub step_rule: StepRule,
    pub mode: SolverMode,
    pub method: Method,
    pub seed: u64,
    /// Extra randomized starts for the set solver.
    pub restarts: usize,
    /// Gap below which a graph cell counts as contact; `10 h^{1 + sbar}` when unset.
    pub tol_contact: Option<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol_energy: 1e-15,
            tol_kkt: 1e-8,
            step_rule: StepRule::BacktrackingArmijo { c1: 1e-4, shrink: 0.5 },
            mode: SolverMode::Quadratic,
            method: Method::ProjectedNewton,
            seed: 0,
            restarts: 4,
            tol_contact: None,
        }
    }
}

impl SolverConfig {
    pub(crate) fn contact_tolerance(&self, spacing: f64, sbar: f64) -> f64 {
        self.tol_contact.unwrap_or_else(|| ContactSet::default_tolerance(spacing, sbar))
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.tol_energy > 0.0 && self.tol_kkt > 0.0 && self.tol_contact.is_none_or(|t| t >= 0.0)) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        match self.step_rule {
            StepRule::FixedStep { tau } if !(tau > 0.0) => Err(Error::Config("fixed step must be positive".into())),
            StepRule::BacktrackingArmijo { c1, shrink } if !(c1 > 0.0 && c1 < 1.0 && shrink > 0.0 && shrink < 1.0) => {
                Err(Error::Config("Armijo parameters must lie in (0, 1)".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Solution {
    Graph(GraphFunction),
    Pair { u: GraphFunction, v: GraphFunction },
    Set(IndicatorGrid),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub solution: Solution,
    pub iterations: usize,
    pub energy_trace: Vec<f64>,
    pub kkt_residual: f64,
    /// Contact set for graph problems.
    pub contact: Option<ContactSet>,
    #[serde(with = "seconds")]
    pub wall_time: Duration,
    pub converged: bool,
    /// Warnings and audit findings.
    pub flags: Vec<String>,
}

impl SolveReport {
    pub fn final_energy(&self) -> f64 {
        *self.energy_trace.last().unwrap_or(&f64::NAN)
    }

    pub fn graph(&self) -> Option<&GraphFunction> {
        match &self.solution {
            Solution::Graph(u) => Some(u),
            _ => None,
        }
    }

    pub fn pair(&self) -> Option<(&GraphFunction, &GraphFunction)> {
        match &self.solution {
            Solution::Pair { u, v } => Some((u, v)),
            _ => None,
        }
    }

    pub fn set(&self) -> Option<&IndicatorGrid> {
        match &self.solution {
            Solution::Set(e) => Some(e),
            _ => None,
        }
    }
}

mod seconds {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}
