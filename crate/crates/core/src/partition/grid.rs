use std::collections::HashMap;

use rayon::prelude::*;

use super::code::ActivationCode;
use super::{PartitionError, Partitioner, Result};
use crate::lp2d::Box2;

/// Region ids of a `resolution x resolution` grid of cell centres.
///
/// Row 0 is the top of the domain (largest `y`), so rows map directly onto
/// image rows. Ids are dense and assigned in row-major order of first
/// appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionGrid {
    pub domain: Box2,
    pub resolution: usize,
    pub layer_limit: usize,
    pub ids: Vec<usize>,
    /// Code of every region id.
    pub codes: Vec<ActivationCode>,
}

impl RegionGrid {
    /// Centre of grid cell (`row`, `col`).
    pub fn center(&self, row: usize, col: usize) -> [f64; 2] {
        grid_center(&self.domain, self.resolution, row, col)
    }

    pub fn id(&self, row: usize, col: usize) -> usize {
        self.ids[row * self.resolution + col]
    }

    pub fn region_count(&self) -> usize {
        self.codes.len()
    }

    /// The same grid with codes cut to their first `layers` layers and ids
    /// renumbered.
    pub fn coarsened(&self, layers: usize) -> RegionGrid {
        let mut index: HashMap<ActivationCode, usize> = HashMap::new();
        let mut codes = Vec::new();
        let remap: Vec<usize> = self
            .codes
            .iter()
            .map(|c| {
                let t = c.truncated(layers);
                *index.entry(t.clone()).or_insert_with(|| {
                    codes.push(t);
                    codes.len() - 1
                })
            })
            .collect();
        // renumber by first appearance in the grid so ids stay canonical
        let mut order = vec![usize::MAX; codes.len()];
        let mut next = 0;
        let mut ids = Vec::with_capacity(self.ids.len());
        for &id in &self.ids {
            let coarse = remap[id];
            if order[coarse] == usize::MAX {
                order[coarse] = next;
                next += 1;
            }
            ids.push(order[coarse]);
        }
        let mut sorted = vec![ActivationCode::default(); codes.len()];
        for (old, code) in codes.into_iter().enumerate() {
            sorted[order[old]] = code;
        }
        RegionGrid {
            domain: self.domain,
            resolution: self.resolution,
            layer_limit: layers.min(self.layer_limit),
            ids,
            codes: sorted,
        }
    }
}

const ROW_BAND: usize = 16;

pub(crate) fn grid_center(domain: &Box2, resolution: usize, row: usize, col: usize) -> [f64; 2] {
    let r = resolution as f64;
    [
        domain.min[0] + (col as f64 + 0.5) * domain.width() / r,
        domain.max[1] - (row as f64 + 0.5) * domain.height() / r,
    ]
}

/// Label each grid-cell centre by its activation code. Rows are evaluated
/// in parallel and merged in row order.
pub fn label_grid<P: Partitioner + ?Sized>(
    model: &P,
    domain: &Box2,
    resolution: usize,
    layer_limit: usize,
) -> Result<RegionGrid> {
    if resolution < 2 {
        return Err(PartitionError::Resolution(resolution));
    }
    if model.input_dim() != 2 {
        return Err(PartitionError::NotTwoDimensional(model.input_dim()));
    }
    if domain.is_degenerate() {
        return Err(PartitionError::DegenerateDomain);
    }
    let mut index: HashMap<ActivationCode, usize> = HashMap::new();
    let mut codes = Vec::new();
    let mut ids = Vec::with_capacity(resolution * resolution);
    // interned a band of rows at a time so only distinct codes stay alive
    for band in (0..resolution).step_by(ROW_BAND) {
        let rows: Vec<Vec<ActivationCode>> = (band..(band + ROW_BAND).min(resolution))
            .into_par_iter()
            .map(|row| {
                (0..resolution)
                    .map(|col| model.code(&grid_center(domain, resolution, row, col), layer_limit))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        for code in rows.into_iter().flatten() {
            let id = *index.entry(code).or_insert_with_key(|c| {
                codes.push(c.clone());
                codes.len() - 1
            });
            ids.push(id);
        }
    }
    Ok(RegionGrid {
        domain: *domain,
        resolution,
        layer_limit,
        ids,
        codes,
    })
}
