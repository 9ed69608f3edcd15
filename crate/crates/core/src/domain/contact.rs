use serde::{Deserialize, Serialize};

use super::graph::GraphFunction;
use crate::error::{Error, Result};

/// Grid cells where a unilateral constraint is active.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContactSet {
    pub indices: Vec<usize>,
    pub tol_contact: f64,
    /// Active cells with at least one inactive grid neighbor.
    pub boundary_indices: Vec<usize>,
}

impl ContactSet {
    /// Default tolerance `10 h^{1 + sbar}`.
    pub fn default_tolerance(spacing: f64, sbar: f64) -> f64 {
        10.0 * spacing.powf(1.0 + sbar)
    }

    /// Contact set `{upper - lower <= tol}` on the grid of `upper`.
    pub fn from_gap(upper: &GraphFunction, lower: &[f64], tol: f64) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::input("contact detection on mismatched grids"));
        }
        let active: Vec<bool> = upper
            .values()
            .iter()
            .zip(lower)
            .map(|(u, l)| u - l <= tol)
            .collect();
        Ok(Self::from_mask(upper, &active, tol))
    }

    pub fn from_mask(grid: &GraphFunction, active: &[bool], tol: f64) -> Self {
        let m = grid.axis_len() as i64;
        let indices: Vec<usize> = (0..active.len()).filter(|&i| active[i]).collect();
        let boundary_indices = indices
            .iter()
            .copied()
            .filter(|&i| {
                let [a, b] = grid.multi_index(i);
                let (a, b) = (a as i64, b as i64);
                let mut nbs = vec![(a - 1, b), (a + 1, b)];
                if grid.dim() == 2 {
                    nbs.push((a, b - 1));
                    nbs.push((a, b + 1));
                }
                nbs.into_iter().any(|(x, y)| {
                    let inside = x >= 0 && x < m && (grid.dim() == 1 || (y >= 0 && y < m));
                    inside && !active[grid.flat_index([x as usize, y as usize])]
                })
            })
            .collect();
        Self {
            indices,
            tol_contact: tol,
            boundary_indices,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.indices.binary_search(&idx).is_ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::graph::ExteriorSpec;

    #[test]
    fn boundary_cells_have_inactive_neighbor() {
        let g = GraphFunction::from_fn(1, 1.0, 0.125, ExteriorSpec::Zero, |x| x[0].abs()).unwrap();
        let zero = vec![0.0; g.len()];
        let c = ContactSet::from_gap(&g, &zero, 0.3).unwrap();
        assert!(!c.is_empty());
        for b in &c.boundary_indices {
            assert!(c.contains(*b));
        }
        assert_eq!(c.boundary_indices.len(), 2);
    }
}
