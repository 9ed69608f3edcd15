use serde::{Deserialize, Serialize};

use super::graph::GraphFunction;
use super::indicator::IndicatorGrid;
use crate::error::{Error, Result};

/// Unilateral constraint: a graph `phi` (constraint `u >= phi`) or a set
/// `O` (constraint `E ⊇ O`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    graph: Option<GraphFunction>,
    set: Option<IndicatorGrid>,
    c1alpha_seminorm: Option<f64>,
    alpha: Option<f64>,
}

impl Obstacle {
    pub fn graph(phi: GraphFunction) -> Self {
        Self {
            graph: Some(phi),
            set: None,
            c1alpha_seminorm: None,
            alpha: None,
        }
    }

    pub fn set(o: IndicatorGrid) -> Self {
        Self {
            graph: None,
            set: Some(o),
            c1alpha_seminorm: None,
            alpha: None,
        }
    }

    /// Attaches `[grad phi]_{C^alpha}` metadata.
    pub fn with_regularity(mut self, alpha: f64, seminorm: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) || !(seminorm >= 0.0) {
            return Err(Error::input("alpha must lie in (0,1] and the seminorm be non-negative"));
        }
        self.alpha = Some(alpha);
        self.c1alpha_seminorm = Some(seminorm);
        Ok(self)
    }

    pub fn as_graph(&self) -> Option<&GraphFunction> {
        self.graph.as_ref()
    }

    pub fn as_set(&self) -> Option<&IndicatorGrid> {
        self.set.as_ref()
    }

    pub fn alpha(&self) -> Option<f64> {
        self.alpha
    }

    pub fn c1alpha_seminorm(&self) -> Option<f64> {
        self.c1alpha_seminorm
    }
}
