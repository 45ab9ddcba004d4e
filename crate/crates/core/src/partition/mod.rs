//! The cells both model families induce on input space.
//!
//! A model's *activation code* at `x` lists, layer by layer, which nodes `x`
//! activates: for a network, which hidden units have a positive
//! pre-activation; for a forest, which branch every tree takes at each
//! depth. Points sharing a code form a cell. Network cells are convex
//! polytopes on which the network is affine; forest cells are boxes.

mod code;
mod exact;
mod grid;
mod render;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::Dataset;
use crate::forest::{ForestError, ForestModel};
use crate::network::{NetworkError, NetworkModel};

pub use code::{ActivationCode, Symbol};
pub use exact::{
    enumerate_forest_regions_2d, enumerate_layers_2d, enumerate_regions_2d, region_inventory,
    AffineMap, RegionCell, RegionRecord, DEFAULT_MARGIN,
};
pub use grid::{label_grid, RegionGrid};
pub use render::{
    hash_color, partition_svg, render_partition_svg, tint_color, PartitionView, RenderMode,
    RenderRequest, Rgb,
};

pub use crate::lp2d::{Box2, HalfPlane};

#[derive(Debug, Error, PartialEq)]
pub enum PartitionError {
    #[error("layer limit {limit} exceeds model depth {depth}")]
    LayerOutOfRange { limit: usize, depth: usize },
    #[error("exact enumeration needs a 2-D model, this one takes {0} inputs")]
    NotTwoDimensional(usize),
    #[error("degenerate domain box")]
    DegenerateDomain,
    #[error("grid resolution must be >= 2, got {0}")]
    Resolution(usize),
    #[error("enumeration exceeded {0} cells")]
    TooManyCells(usize),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

pub type Result<T> = std::result::Result<T, PartitionError>;

/// A trained classifier of either family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "model", rename_all = "lowercase")]
pub enum Model {
    Forest(ForestModel),
    Network(NetworkModel),
}

/// Anything that assigns activation codes to points.
pub trait Partitioner: Sync {
    fn input_dim(&self) -> usize;

    /// Number of code layers: hidden layers for a network, maximum tree
    /// depth for a forest.
    fn layer_depth(&self) -> usize;

    fn code(&self, x: &[f64], layer_limit: usize) -> Result<ActivationCode>;

    fn posterior(&self, x: &[f64]) -> Result<Vec<f64>>;
}

fn check_limit(limit: usize, depth: usize) -> Result<()> {
    if limit > depth {
        Err(PartitionError::LayerOutOfRange { limit, depth })
    } else {
        Ok(())
    }
}

impl Partitioner for NetworkModel {
    fn input_dim(&self) -> usize {
        self.dimension()
    }

    fn layer_depth(&self) -> usize {
        self.hidden_layers()
    }

    fn code(&self, x: &[f64], layer_limit: usize) -> Result<ActivationCode> {
        check_limit(layer_limit, self.hidden_layers())?;
        let f = self.forward(x)?;
        let layers = f.pre_activations[..layer_limit]
            .iter()
            .map(|z| z.iter().map(|&v| Symbol::from_bit(v > 0.0)).collect::<Vec<_>>());
        Ok(ActivationCode::from_layers(layers))
    }

    fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.predict_proba(x)?)
    }
}

impl Partitioner for ForestModel {
    fn input_dim(&self) -> usize {
        self.dimension
    }

    fn layer_depth(&self) -> usize {
        self.max_depth()
    }

    fn code(&self, x: &[f64], layer_limit: usize) -> Result<ActivationCode> {
        check_limit(layer_limit, self.max_depth())?;
        self.check_input(x)?;
        let paths: Vec<Vec<bool>> = self.trees.iter().map(|t| t.path(x)).collect();
        let layers = (0..layer_limit).map(|depth| {
            paths
                .iter()
                .map(|p| p.get(depth).map_or(Symbol::Absent, |&r| Symbol::from_bit(r)))
                .collect::<Vec<_>>()
        });
        Ok(ActivationCode::from_layers(layers))
    }

    fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(ForestModel::posterior(self, x)?)
    }
}

impl Partitioner for Model {
    fn input_dim(&self) -> usize {
        match self {
            Model::Forest(m) => m.input_dim(),
            Model::Network(m) => m.input_dim(),
        }
    }

    fn layer_depth(&self) -> usize {
        match self {
            Model::Forest(m) => m.layer_depth(),
            Model::Network(m) => m.layer_depth(),
        }
    }

    fn code(&self, x: &[f64], layer_limit: usize) -> Result<ActivationCode> {
        match self {
            Model::Forest(m) => m.code(x, layer_limit),
            Model::Network(m) => m.code(x, layer_limit),
        }
    }

    fn posterior(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            Model::Forest(m) => Partitioner::posterior(m, x),
            Model::Network(m) => Partitioner::posterior(m, x),
        }
    }
}

/// Activation code of `x` through the first `layer_limit` layers.
pub fn activation_code<P: Partitioner + ?Sized>(
    model: &P,
    x: &[f64],
    layer_limit: usize,
) -> Result<ActivationCode> {
    model.code(x, layer_limit)
}

/// Class counts of the training points in a cell and the resulting
/// frequency posterior; `posterior` is `None` for an empty cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellStats {
    pub counts: Vec<usize>,
    pub posterior: Option<Vec<f64>>,
}

impl CellStats {
    pub fn from_counts(counts: Vec<usize>) -> Self {
        let total: usize = counts.iter().sum();
        let posterior =
            (total > 0).then(|| counts.iter().map(|&c| c as f64 / total as f64).collect());
        Self { counts, posterior }
    }

    pub fn is_empty(&self) -> bool {
        self.posterior.is_none()
    }

    pub fn count(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Per-code class counts of the rows of `ds`.
pub fn code_class_counts<P: Partitioner + ?Sized>(
    model: &P,
    ds: &Dataset,
    layer_limit: usize,
) -> Result<HashMap<ActivationCode, Vec<usize>>> {
    let mut table: HashMap<ActivationCode, Vec<usize>> = HashMap::new();
    for (i, row) in ds.rows().enumerate() {
        let code = model.code(row, layer_limit)?;
        table.entry(code).or_insert_with(|| vec![0; ds.class_count()])[ds.label(i)] += 1;
    }
    Ok(table)
}

/// Frequency posteriors of the cells named by `codes`, estimated from the
/// training rows whose code matches.
pub fn cell_posteriors<P: Partitioner + ?Sized>(
    codes: &[ActivationCode],
    model: &P,
    ds: &Dataset,
    layer_limit: usize,
) -> Result<Vec<CellStats>> {
    let table = code_class_counts(model, ds, layer_limit)?;
    Ok(codes
        .iter()
        .map(|c| {
            CellStats::from_counts(
                table
                    .get(c)
                    .cloned()
                    .unwrap_or_else(|| vec![0; ds.class_count()]),
            )
        })
        .collect())
}

/// Fill the count and posterior fields of enumerated cells.
pub fn fill_cell_posteriors<P: Partitioner + ?Sized>(
    cells: &mut [RegionCell],
    model: &P,
    ds: &Dataset,
    layer_limit: usize,
) -> Result<()> {
    let codes: Vec<ActivationCode> = cells.iter().map(|c| c.code.clone()).collect();
    for (cell, stats) in cells.iter_mut().zip(cell_posteriors(&codes, model, ds, layer_limit)?) {
        cell.stats = Some(stats);
    }
    Ok(())
}

/// Default enumeration window: the data bounding box grown by 10% per side.
pub fn default_domain(ds: &Dataset) -> Result<Box2> {
    if ds.dim() != 2 {
        return Err(PartitionError::NotTwoDimensional(ds.dim()));
    }
    let b = ds.bounds();
    let domain = Box2::new([b[0].0, b[1].0], [b[0].1, b[1].1]).inflated(0.1);
    if domain.is_degenerate() {
        return Err(PartitionError::DegenerateDomain);
    }
    Ok(domain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::TreeNode;

    pub(crate) fn one_unit_net() -> NetworkModel {
        let mut m = NetworkModel::zeros(&[2, 1, 2]).unwrap();
        m.weights[0] = vec![1.0, 0.0];
        m
    }

    pub(crate) fn stump() -> ForestModel {
        let leaf = |p: Vec<f64>, id| TreeNode::Leaf {
            posterior: p,
            count: 1,
            cell_id: id,
        };
        ForestModel {
            trees: vec![TreeNode::Internal {
                feature: 0,
                threshold: 0.5,
                left: Box::new(leaf(vec![1.0, 0.0], 0)),
                right: Box::new(leaf(vec![0.0, 1.0], 1)),
            }],
            tree_count: 1,
            max_features: 1,
            bootstrap: false,
            bootstrap_seeds: vec![0],
            dimension: 2,
            class_count: 2,
            criterion: "gini".into(),
            depth: Default::default(),
        }
    }

    #[test]
    fn network_codes() {
        let m = one_unit_net();
        assert_eq!(activation_code(&m, &[2.0, 3.0], 1).unwrap().symbols(), &[Symbol::On]);
        assert_eq!(activation_code(&m, &[-1.0, 3.0], 1).unwrap().symbols(), &[Symbol::Off]);
        // on the hyperplane: strict ">" gives "off"
        assert_eq!(activation_code(&m, &[0.0, 3.0], 1).unwrap().symbols(), &[Symbol::Off]);
        assert_eq!(
            activation_code(&m, &[0.0, 3.0], 2),
            Err(PartitionError::LayerOutOfRange { limit: 2, depth: 1 })
        );
    }

    #[test]
    fn forest_codes() {
        let m = stump();
        assert_eq!(m.code(&[0.2, 0.0], 1).unwrap().symbols(), &[Symbol::Off]);
        assert_eq!(m.code(&[0.9, 0.0], 1).unwrap().symbols(), &[Symbol::On]);
        assert_eq!(m.code(&[0.9, 0.0], 0).unwrap().len(), 0);
    }

    #[test]
    fn counting_posteriors() {
        let s = CellStats::from_counts(vec![1, 2]);
        let p = s.posterior.unwrap();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15 && (p[1] - 2.0 / 3.0).abs() < 1e-15);
        assert!(CellStats::from_counts(vec![0, 0]).is_empty());
    }

    #[test]
    fn posteriors_by_code() {
        let m = stump();
        let ds = Dataset::new(
            "t",
            vec![0.0, 0.0, 0.1, 0.0, 0.9, 0.0, 0.2, 0.0],
            2,
            vec![1, 1, 0, 0],
            2,
        )
        .unwrap();
        let left = m.code(&[0.0, 0.0], 1).unwrap();
        let right = m.code(&[1.0, 0.0], 1).unwrap();
        let unseen = ActivationCode::from_layers(vec![vec![Symbol::Absent]]);
        let stats = cell_posteriors(&[left, right, unseen], &m, &ds, 1).unwrap();
        assert_eq!(stats[0].counts, vec![1, 2]);
        assert_eq!(stats[1].counts, vec![1, 0]);
        assert!(stats[2].is_empty());
    }
}
