//! Variational functionals: set interactions and s-perimeters, discrete
//! perimeters, forcing terms and the two-membranes energy on graphs.

mod graph;
mod set;
mod table;

pub use graph::{
    forcing_integral, graph_area, graph_area_gradient, graph_area_hessian, membrane_s_term, two_membranes_energy,
    GraphSPerimeter, QuadraticModel,
};
pub(crate) use graph::same_grid;
pub use set::{indicator_perimeter, interaction, s_perimeter, SetEnergy, Window};
pub use table::InteractionTable;

use serde::{Deserialize, Serialize};

use crate::domain::{GraphFunction, IndicatorGrid};
use crate::error::Result;
use crate::record;

/// How the nonlocal term of a graph is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnergyMode {
    #[default]
    Quadratic,
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub s_perimeter: f64,
    pub perimeter: f64,
    #[serde(rename = "forcing_E")]
    pub forcing_e: f64,
    #[serde(rename = "forcing_F")]
    pub forcing_f: f64,
    pub total: f64,
}

impl EnergyBreakdown {
    pub fn new(s_perimeter: f64, perimeter: f64, forcing_e: f64, forcing_f: f64) -> Self {
        Self {
            s_perimeter,
            perimeter,
            forcing_e,
            forcing_f,
            total: s_perimeter + perimeter + forcing_e + forcing_f,
        }
    }

    /// Flat `key = value` record.
    pub fn to_record(&self) -> String {
        record::write(&[
            ("s_perimeter", self.s_perimeter),
            ("perimeter", self.perimeter),
            ("forcing_E", self.forcing_e),
            ("forcing_F", self.forcing_f),
            ("total", self.total),
        ])
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let r = record::parse(text)?;
        Ok(Self {
            s_perimeter: record::get(&r, "s_perimeter")?,
            perimeter: record::get(&r, "perimeter")?,
            forcing_e: record::get(&r, "forcing_E")?,
            forcing_f: record::get(&r, "forcing_F")?,
            total: record::get(&r, "total")?,
        })
    }
}

/// Shape whose local perimeter is measured.
#[derive(Debug, Clone, Copy)]
pub enum Shape<'a> {
    Graph(&'a GraphFunction),
    Set(&'a IndicatorGrid),
}

/// Graph area for graphs, mollified total variation for sharp sets.
pub fn perimeter(shape: Shape<'_>, window: &Window) -> Result<f64> {
    match shape {
        Shape::Graph(v) => Ok(graph_area(v, Some(window))),
        Shape::Set(f) => indicator_perimeter(f, window),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn breakdown_round_trips_through_records() {
        let b = EnergyBreakdown::new(0.1, 2.0, -0.3, 1.0 / 3.0);
        assert_eq!((b.total - (0.1 + 2.0 - 0.3 + 1.0 / 3.0)).abs() < 1e-15, true);
        let back = EnergyBreakdown::from_record(&b.to_record()).unwrap();
        assert_eq!(b, back);
    }
}
