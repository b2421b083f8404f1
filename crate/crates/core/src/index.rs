//! Grid acceleration for detector lookups.
//!
//! Detectors are bucketed by the cells their bounding box overlaps on a
//! fixed grid over the first (up to) two dimensions. A query visits the
//! single cell containing the point's projection and runs the exact
//! closed-ball test on the candidates found there, so results agree
//! exactly with a naive linear scan over the whole set.

use crate::negsel::DetectorSet;
use crate::representation::euclidean;
use crate::{Error, Result};

/// Cells per indexed dimension.
const GRID_RES: usize = 16;

pub struct GridIndex {
    dims_used: usize,
    cells: Vec<Vec<usize>>,
}

impl GridIndex {
    pub fn build(set: &DetectorSet) -> Self {
        let dims_used = set.dims.clamp(1, 2);
        let n_cells = GRID_RES.pow(dims_used as u32);
        let mut cells: Vec<Vec<usize>> = vec![Vec::new(); n_cells];

        for (idx, det) in set.detectors.iter().enumerate() {
            let ranges: Vec<(usize, usize)> = (0..dims_used)
                .map(|d| {
                    let lo = cell_of(det.center[d] - det.radius);
                    let hi = cell_of(det.center[d] + det.radius);
                    (lo, hi)
                })
                .collect();
            match dims_used {
                1 => {
                    for cell in &mut cells[ranges[0].0..=ranges[0].1] {
                        cell.push(idx);
                    }
                }
                _ => {
                    for x in ranges[0].0..=ranges[0].1 {
                        for y in ranges[1].0..=ranges[1].1 {
                            cells[x + GRID_RES * y].push(idx);
                        }
                    }
                }
            }
        }

        Self { dims_used, cells }
    }

    /// Ids of every detector covering `vector`, ascending; identical to
    /// [`DetectorSet::matches`] by construction.
    pub fn matches(&self, set: &DetectorSet, vector: &[f64]) -> Result<Vec<u64>> {
        if vector.len() != set.dims {
            return Err(Error::Dimension { expected: set.dims, got: vector.len() });
        }
        let cell = match self.dims_used {
            1 => cell_of(vector[0]),
            _ => cell_of(vector[0]) + GRID_RES * cell_of(vector[1]),
        };
        let mut ids = Vec::new();
        for &idx in &self.cells[cell] {
            let det = &set.detectors[idx];
            if euclidean(&det.center, vector)? <= det.radius {
                ids.push(det.id);
            }
        }
        ids.sort_unstable();
        Ok(ids)
    }
}

fn cell_of(coord: f64) -> usize {
    let clamped = coord.clamp(0.0, 1.0);
    ((clamped * GRID_RES as f64) as usize).min(GRID_RES - 1)
}
