//! Singular-integral evaluators for graphs and sets.
//!
//! All kernels are unnormalized: the graph operators use `|z|^{-(d + 1 + 2s)}`
//! on the base space `R^d`, the set operators use `|z|^{-(n + 2s)}` on `R^n`.

mod graph;
mod set;
mod stencil;

pub use graph::{
    frac_laplacian, frac_laplacian_all, fractional_curvature_graph, fractional_curvature_graph_all,
    linearization_error, truncated_frac_laplacian, GraphOperator,
};
pub(crate) use set::{ray_exit, ray_integral};
pub use set::{fractional_curvature_set, truncated_curvature, truncated_kernel_fE, SetEvaluator};
pub use stencil::GraphStencil;

use serde::{Deserialize, Serialize};

use crate::domain::FractionalOrder;
use crate::error::{Error, Result};

/// Quadrature parameters shared by the evaluators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub order: FractionalOrder,
    /// Grid spacing the stencils are built for.
    pub spacing: f64,
    pub truncation_radius: Option<f64>,
    /// Half-width of the box of offsets treated with second-moment-exact weights.
    pub near_field_split: f64,
    /// Radius beyond which exterior data are integrated with the far-field rule.
    pub far_field_radius: f64,
    /// Largest admissible discrete slope for graph curvature.
    pub slope_cap: f64,
}

impl KernelSpec {
    /// Defaults: truncation radius 1/4, split `min(8h, 1/8)`, far radius 16, slope cap 10.
    pub fn new(order: FractionalOrder, spacing: f64) -> Result<Self> {
        let truncation = 0.25;
        let spec = Self {
            order,
            spacing,
            truncation_radius: Some(truncation),
            near_field_split: (8.0 * spacing).min(0.5 * truncation),
            far_field_radius: 64.0 * truncation,
            slope_cap: 10.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn without_truncation(mut self) -> Self {
        self.truncation_radius = None;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let h = self.spacing;
        if !(h.is_finite() && h > 0.0) {
            return Err(Error::Config("spacing must be positive".into()));
        }
        if !(self.near_field_split >= h && self.near_field_split.is_finite()) {
            return Err(Error::Config("near-field split must be at least one cell".into()));
        }
        let upper = self.truncation_radius.unwrap_or(self.far_field_radius);
        if let Some(t) = self.truncation_radius {
            if !(t < self.far_field_radius) {
                return Err(Error::Config("truncation radius must be below the far-field radius".into()));
            }
        }
        if !(self.near_field_split < upper) {
            return Err(Error::Config("near-field split must be below the truncation radius".into()));
        }
        if !(self.slope_cap > 0.0) {
            return Err(Error::Config("slope cap must be positive".into()));
        }
        Ok(())
    }

    /// Number of cells per axis in the near-field box around the origin.
    pub(crate) fn near_cells(&self) -> usize {
        ((self.near_field_split / self.spacing) + 1e-9).floor() as usize
    }

    pub(crate) fn check_spacing(&self, h: f64) -> Result<()> {
        if (h - self.spacing).abs() > 1e-12 * h {
            return Err(Error::Config(format!(
                "kernel spec built for spacing {} but grid has spacing {h}",
                self.spacing
            )));
        }
        Ok(())
    }
}
