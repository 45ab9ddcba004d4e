//! Exact cell enumeration for 2-D inputs.
//!
//! Network cells are refined layer by layer. Inside a cell the input to the
//! current layer is an affine function of `x`, so each unit's pre-activation
//! is affine too and its zero set is a line. Every cell the line properly
//! crosses is split in two; nonemptiness of each side is decided by a 2-D
//! LP with an interior margin, so slivers thinner than the margin are left
//! with their neighbour.

use serde::{Deserialize, Serialize};

use super::code::{ActivationCode, Symbol};
use super::{check_limit, CellStats, PartitionError, Result};
use crate::forest::{ForestModel, TreeNode};
use crate::lp2d::{self, Box2, HalfPlane};
use crate::network::NetworkModel;

/// Interior margin (Euclidean distance) a cell must admit to exist.
pub const DEFAULT_MARGIN: f64 = 1e-9;

const MAX_CELLS: usize = 500_000;

/// `h(x) = rows * x + bias`, one row per output component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    pub rows: Vec<[f64; 2]>,
    pub bias: Vec<f64>,
}

impl AffineMap {
    pub fn identity() -> Self {
        Self {
            rows: vec![[1.0, 0.0], [0.0, 1.0]],
            bias: vec![0.0, 0.0],
        }
    }

    pub fn apply(&self, x: [f64; 2]) -> Vec<f64> {
        self.rows
            .iter()
            .zip(&self.bias)
            .map(|(r, b)| r[0] * x[0] + r[1] * x[1] + b)
            .collect()
    }
}

/// One convex cell of the partition.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionCell {
    pub code: ActivationCode,
    /// Constraints `normal . x <= offset` cutting the cell out of the
    /// domain box (the box sides themselves are not repeated).
    pub halfspaces: Vec<HalfPlane>,
    /// Input of the next layer (post-ReLU output of the last enumerated
    /// layer) as an affine function of `x` on this cell.
    pub affine_map: AffineMap,
    /// Counter-clockwise vertices of the cell clipped to the domain.
    pub polygon: Vec<[f64; 2]>,
    /// A point strictly inside every half-space.
    pub witness: [f64; 2],
    pub stats: Option<CellStats>,
}

impl RegionCell {
    pub fn contains_strictly(&self, x: [f64; 2]) -> bool {
        self.halfspaces.iter().all(|h| h.contains_strictly(x))
    }

    pub fn area(&self) -> f64 {
        lp2d::polygon_area(&self.polygon)
    }
}

struct Piece {
    halfspaces: Vec<HalfPlane>,
    symbols: Vec<Symbol>,
    /// Pre-activation pieces of the current layer, kept to build the map.
    units: Vec<([f64; 2], f64)>,
    witness: [f64; 2],
}

fn finish(
    domain: &Box2,
    code: ActivationCode,
    halfspaces: Vec<HalfPlane>,
    affine_map: AffineMap,
    fallback: [f64; 2],
) -> RegionCell {
    let polygon = lp2d::clip_polygon(domain, &halfspaces);
    let centroid = if polygon.len() >= 3 {
        lp2d::polygon_centroid(&polygon)
    } else {
        fallback
    };
    let inside = |p: [f64; 2]| halfspaces.iter().all(|h| h.contains_strictly(p));
    let witness = if inside(centroid) && domain.contains(centroid) {
        centroid
    } else {
        fallback
    };
    RegionCell {
        code,
        halfspaces,
        affine_map,
        polygon,
        witness,
        stats: None,
    }
}

fn check_domain(domain: &Box2) -> Result<()> {
    if domain.is_degenerate() {
        Err(PartitionError::DegenerateDomain)
    } else {
        Ok(())
    }
}

/// Cells after each of the first `layer_limit` hidden layers; entry `l`
/// holds the partition induced by layers `1..=l` (entry 0 is the domain).
pub fn enumerate_layers_2d(
    model: &NetworkModel,
    domain: &Box2,
    layer_limit: usize,
) -> Result<Vec<Vec<RegionCell>>> {
    if model.dimension() != 2 {
        return Err(PartitionError::NotTwoDimensional(model.dimension()));
    }
    check_domain(domain)?;
    check_limit(layer_limit, model.hidden_layers())?;

    let root = finish(
        domain,
        ActivationCode::default(),
        Vec::new(),
        AffineMap::identity(),
        domain.center(),
    );
    let mut snapshots = vec![vec![root]];
    for layer in 0..layer_limit {
        let prev = snapshots.last().expect("non-empty");
        let next = refine_layer(model, layer, prev, domain, DEFAULT_MARGIN)?;
        snapshots.push(next);
    }
    Ok(snapshots)
}

/// Exact partition induced by the first `layer_limit` hidden layers.
pub fn enumerate_regions_2d(
    model: &NetworkModel,
    domain: &Box2,
    layer_limit: usize,
) -> Result<Vec<RegionCell>> {
    let mut layers = enumerate_layers_2d(model, domain, layer_limit)?;
    Ok(layers.pop().expect("at least the domain cell"))
}

fn refine_layer(
    model: &NetworkModel,
    layer: usize,
    cells: &[RegionCell],
    domain: &Box2,
    margin: f64,
) -> Result<Vec<RegionCell>> {
    let width = model.widths[layer + 1];
    let weights = &model.weights[layer];
    let biases = &model.biases[layer];
    let mut out = Vec::new();
    for cell in cells {
        let map = &cell.affine_map;
        let mut pieces = vec![Piece {
            halfspaces: cell.halfspaces.clone(),
            symbols: Vec::with_capacity(width),
            units: Vec::with_capacity(width),
            witness: cell.witness,
        }];
        for k in 0..width {
            // z_k(x) = normal . x + offset on this cell
            let mut normal = [0.0, 0.0];
            let mut offset = biases[k];
            for (i, (row, b)) in map.rows.iter().zip(&map.bias).enumerate() {
                let w = weights[i * width + k];
                normal[0] += w * row[0];
                normal[1] += w * row[1];
                offset += w * b;
            }
            let on = HalfPlane::new([-normal[0], -normal[1]], offset);
            let off = HalfPlane::new(normal, -offset);
            let mut next = Vec::with_capacity(pieces.len() * 2);
            for mut piece in pieces {
                piece.units.push((normal, offset));
                if normal == [0.0, 0.0] {
                    piece.symbols.push(Symbol::from_bit(offset > 0.0));
                    next.push(piece);
                    continue;
                }
                let side = |h: HalfPlane| {
                    let mut cons = piece.halfspaces.clone();
                    cons.push(h);
                    lp2d::feasible_with_margin(&cons, domain, margin).map(|w| (cons, w))
                };
                match (side(on), side(off)) {
                    (Some((on_cons, on_w)), Some((off_cons, off_w))) => {
                        let mut other = Piece {
                            halfspaces: off_cons,
                            symbols: piece.symbols.clone(),
                            units: piece.units.clone(),
                            witness: off_w,
                        };
                        other.symbols.push(Symbol::Off);
                        piece.halfspaces = on_cons;
                        piece.witness = on_w;
                        piece.symbols.push(Symbol::On);
                        next.push(piece);
                        next.push(other);
                    }
                    (Some(_), None) => {
                        piece.symbols.push(Symbol::On);
                        next.push(piece);
                    }
                    (None, Some(_)) => {
                        piece.symbols.push(Symbol::Off);
                        next.push(piece);
                    }
                    (None, None) => {
                        let z = normal[0] * piece.witness[0] + normal[1] * piece.witness[1] + offset;
                        piece.symbols.push(Symbol::from_bit(z > 0.0));
                        next.push(piece);
                    }
                }
            }
            if next.len() > MAX_CELLS {
                return Err(PartitionError::TooManyCells(MAX_CELLS));
            }
            pieces = next;
        }
        for piece in pieces {
            let mut code = cell.code.clone();
            code.push_layer(piece.symbols.iter().copied());
            let mut rows = Vec::with_capacity(width);
            let mut bias = Vec::with_capacity(width);
            for (&(normal, offset), &s) in piece.units.iter().zip(&piece.symbols) {
                if s == Symbol::On {
                    rows.push(normal);
                    bias.push(offset);
                } else {
                    rows.push([0.0, 0.0]);
                    bias.push(0.0);
                }
            }
            out.push(finish(
                domain,
                code,
                piece.halfspaces,
                AffineMap { rows, bias },
                piece.witness,
            ));
        }
        if out.len() > MAX_CELLS {
            return Err(PartitionError::TooManyCells(MAX_CELLS));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Forests

/// Node regions of one tree down to `depth`: branch path padded with
/// `Absent`, and the `(lo, hi]` bounds per axis.
fn tree_regions(tree: &TreeNode, depth: usize) -> Vec<(Vec<Symbol>, [(f64, f64); 2])> {
    fn walk(
        node: &TreeNode,
        depth: usize,
        path: &mut Vec<Symbol>,
        bounds: [(f64, f64); 2],
        out: &mut Vec<(Vec<Symbol>, [(f64, f64); 2])>,
    ) {
        match node {
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
            } if path.len() < depth => {
                let f = *feature;
                let mut lb = bounds;
                lb[f].1 = lb[f].1.min(*threshold);
                path.push(Symbol::Off);
                walk(left, depth, path, lb, out);
                path.pop();
                let mut rb = bounds;
                rb[f].0 = rb[f].0.max(*threshold);
                path.push(Symbol::On);
                walk(right, depth, path, rb, out);
                path.pop();
            }
            _ => {
                let mut padded = path.clone();
                padded.resize(depth, Symbol::Absent);
                out.push((padded, bounds));
            }
        }
    }
    let mut out = Vec::new();
    let inf = (f64::NEG_INFINITY, f64::INFINITY);
    walk(tree, depth, &mut Vec::new(), [inf, inf], &mut out);
    out
}

/// Exact forest partition of a 2-D domain: the common refinement of every
/// tree's box partition through depth `layer_limit`.
pub fn enumerate_forest_regions_2d(
    model: &ForestModel,
    domain: &Box2,
    layer_limit: usize,
) -> Result<Vec<RegionCell>> {
    if model.dimension != 2 {
        return Err(PartitionError::NotTwoDimensional(model.dimension));
    }
    check_domain(domain)?;
    check_limit(layer_limit, model.max_depth())?;

    let tree_count = model.trees.len();
    // (box, per-tree paths)
    let mut cells: Vec<(Box2, Vec<Vec<Symbol>>)> = vec![(*domain, Vec::new())];
    for tree in &model.trees {
        let regions = tree_regions(tree, layer_limit);
        let mut next = Vec::new();
        for (bx, paths) in &cells {
            for (path, bounds) in &regions {
                let lo = [bx.min[0].max(bounds[0].0), bx.min[1].max(bounds[1].0)];
                let hi = [bx.max[0].min(bounds[0].1), bx.max[1].min(bounds[1].1)];
                if hi[0] - lo[0] > DEFAULT_MARGIN && hi[1] - lo[1] > DEFAULT_MARGIN {
                    let mut p = paths.clone();
                    p.push(path.clone());
                    next.push((Box2::new(lo, hi), p));
                }
            }
        }
        if next.len() > MAX_CELLS {
            return Err(PartitionError::TooManyCells(MAX_CELLS));
        }
        cells = next;
    }
    Ok(cells
        .into_iter()
        .map(|(bx, paths)| {
            let code = ActivationCode::from_layers(
                (0..layer_limit).map(|l| (0..tree_count).map(|t| paths[t][l]).collect::<Vec<_>>()),
            );
            let mut halfspaces = Vec::new();
            for (axis, (lo, hi)) in [(0, (bx.min[0], bx.max[0])), (1, (bx.min[1], bx.max[1]))] {
                let mut n = [0.0, 0.0];
                if lo > domain.min[axis] {
                    n[axis] = -1.0;
                    halfspaces.push(HalfPlane::new(n, -lo));
                }
                if hi < domain.max[axis] {
                    n[axis] = 1.0;
                    halfspaces.push(HalfPlane::new(n, hi));
                }
            }
            finish(domain, code, halfspaces, AffineMap::identity(), bx.center())
        })
        .collect())
}

// ---------------------------------------------------------------------------
// Inventory export

/// JSON row of the region inventory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub code: String,
    pub halfspaces: Vec<HalfPlane>,
    pub posterior: Option<Vec<f64>>,
    pub count: usize,
}

pub fn region_inventory(cells: &[RegionCell]) -> Vec<RegionRecord> {
    cells
        .iter()
        .map(|c| RegionRecord {
            code: c.code.to_hex(),
            halfspaces: c.halfspaces.clone(),
            posterior: c.stats.as_ref().and_then(|s| s.posterior.clone()),
            count: c.stats.as_ref().map_or(0, CellStats::count),
        })
        .collect()
}
