//! SVG partition maps: one fill per cell, either an arbitrary colour derived
//! from the cell's code or a tint mixed from the cell's class posterior.

use std::collections::BTreeMap;
use std::hash::Hasher;
use std::path::Path;
use std::str::FromStr;

use super::code::ActivationCode;
use super::exact::RegionCell;
use super::grid::RegionGrid;
use super::CellStats;
use crate::data::Dataset;
use crate::lp2d::Box2;
use crate::svg::{hex, Svg};

pub type Rgb = [u8; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RenderMode {
    /// An arbitrary distinct colour per region.
    UniqueColor,
    /// Regions tinted by their class posterior.
    ClassTint,
    /// Class tint plus the boundaries of every coarser layer drawn on top.
    LayerOverlay,
}

impl FromStr for RenderMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "unique-color" => Ok(RenderMode::UniqueColor),
            "class-tint" => Ok(RenderMode::ClassTint),
            "layer-overlay" => Ok(RenderMode::LayerOverlay),
            other => Err(format!("unknown render mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum PartitionView<'a> {
    Grid(&'a RegionGrid),
    Cells { domain: Box2, cells: &'a [RegionCell] },
}

impl PartitionView<'_> {
    fn domain(&self) -> Box2 {
        match self {
            PartitionView::Grid(g) => g.domain,
            PartitionView::Cells { domain, .. } => *domain,
        }
    }

    fn code(&self, region: usize) -> &ActivationCode {
        match self {
            PartitionView::Grid(g) => &g.codes[region],
            PartitionView::Cells { cells, .. } => &cells[region].code,
        }
    }
}

pub struct RenderRequest<'a> {
    pub view: PartitionView<'a>,
    /// Per-region statistics, indexed like the view's regions (grid ids or
    /// cell order). Required for a meaningful class tint.
    pub stats: Option<&'a [CellStats]>,
    /// Coarser partitions whose boundaries are drawn over the fill, finest
    /// last.
    pub overlays: Vec<PartitionView<'a>>,
    /// Optional sample points drawn on top.
    pub points: Option<&'a Dataset>,
    pub size: u32,
}

impl<'a> RenderRequest<'a> {
    pub fn new(view: PartitionView<'a>) -> Self {
        Self {
            view,
            stats: None,
            overlays: Vec::new(),
            points: None,
            size: 512,
        }
    }
}

const NEUTRAL: Rgb = [204, 204, 204];
const PALETTE: [Rgb; 10] = [
    [118, 42, 131],  // purple
    [27, 120, 55],   // green
    [33, 102, 172],
    [230, 97, 1],
    [178, 24, 43],
    [53, 151, 143],
    [140, 81, 10],
    [197, 27, 125],
    [77, 77, 77],
    [191, 129, 45],
];

fn class_color(class: usize) -> Rgb {
    PALETTE[class % PALETTE.len()]
}

/// Arbitrary but deterministic colour for a code.
pub fn hash_color(code: &ActivationCode) -> Rgb {
    let mut h = fnv::FnvHasher::default();
    h.write(code.to_hex().as_bytes());
    h.write_usize(code.len());
    let v = h.finish();
    let channel = |shift: u32| (40 + ((v >> shift) & 0xff) * 190 / 255) as u8;
    [channel(0), channel(8), channel(16)]
}

/// Blend of the class colours weighted by the posterior, faded toward white
/// as the posterior approaches uniform. Empty cells are neutral grey.
pub fn tint_color(stats: &CellStats) -> Rgb {
    let Some(p) = &stats.posterior else {
        return NEUTRAL;
    };
    let c = p.len().max(2) as f64;
    let mut base = [0.0; 3];
    for (class, &w) in p.iter().enumerate() {
        let col = class_color(class);
        for k in 0..3 {
            base[k] += w * f64::from(col[k]);
        }
    }
    let top = p.iter().copied().fold(0.0, f64::max);
    let strength = 0.25 + 0.75 * ((top - 1.0 / c) / (1.0 - 1.0 / c)).clamp(0.0, 1.0);
    let mut out = [0u8; 3];
    for k in 0..3 {
        out[k] = (255.0 * (1.0 - strength) + base[k] * strength).round() as u8;
    }
    out
}

struct Frame {
    domain: Box2,
    size: f64,
}

impl Frame {
    fn map(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.domain.min[0]) / self.domain.width() * self.size,
            (self.domain.max[1] - p[1]) / self.domain.height() * self.size,
        ]
    }
}

fn fill_for(req: &RenderRequest<'_>, mode: RenderMode, region: usize) -> Rgb {
    match (mode, req.stats) {
        (RenderMode::ClassTint | RenderMode::LayerOverlay, Some(stats)) => tint_color(&stats[region]),
        _ => hash_color(req.view.code(region)),
    }
}

fn draw_fill(svg: &mut Svg, req: &RenderRequest<'_>, mode: RenderMode, frame: &Frame) {
    match req.view {
        PartitionView::Grid(g) => {
            let px = frame.size / g.resolution as f64;
            let colors: Vec<Rgb> = (0..g.region_count()).map(|r| fill_for(req, mode, r)).collect();
            for row in 0..g.resolution {
                let mut col = 0;
                while col < g.resolution {
                    let color = colors[g.id(row, col)];
                    let start = col;
                    while col < g.resolution && colors[g.id(row, col)] == color {
                        col += 1;
                    }
                    svg.rect(
                        start as f64 * px,
                        row as f64 * px,
                        (col - start) as f64 * px,
                        px,
                        &format!(r#"fill="{}""#, hex(color)),
                    );
                }
            }
        }
        PartitionView::Cells { cells, .. } => {
            for (i, cell) in cells.iter().enumerate() {
                let pts: Vec<[f64; 2]> = cell.polygon.iter().map(|&p| frame.map(p)).collect();
                let color = hex(fill_for(req, mode, i));
                svg.polygon(&pts, &format!(r#"fill="{color}" stroke="{color}" stroke-width="0.5""#));
            }
        }
    }
}

/// Boundaries between differing grid ids as merged axis-parallel segments.
fn grid_boundary_path(g: &RegionGrid, frame: &Frame) -> String {
    let px = frame.size / g.resolution as f64;
    let n = g.resolution;
    // vertical edges keyed by x index, horizontal by y index: sorted maps
    // keep the path deterministic
    let mut vertical: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut horizontal: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for row in 0..n {
        for col in 0..n {
            if col > 0 && g.id(row, col) != g.id(row, col - 1) {
                vertical.entry(col).or_default().push(row);
            }
            if row > 0 && g.id(row, col) != g.id(row - 1, col) {
                horizontal.entry(row).or_default().push(col);
            }
        }
    }
    let mut d = String::new();
    let mut runs = |key: usize, cells: &[usize], vertical: bool| {
        let mut i = 0;
        while i < cells.len() {
            let start = cells[i];
            let mut end = start;
            while i + 1 < cells.len() && cells[i + 1] == end + 1 {
                i += 1;
                end += 1;
            }
            i += 1;
            let (a, b) = (start as f64 * px, (end + 1) as f64 * px);
            let k = key as f64 * px;
            let seg = if vertical {
                format!("M{} {}V{}", crate::svg::num(k), crate::svg::num(a), crate::svg::num(b))
            } else {
                format!("M{} {}H{}", crate::svg::num(a), crate::svg::num(k), crate::svg::num(b))
            };
            d.push_str(&seg);
        }
    };
    for (k, cells) in &vertical {
        runs(*k, cells, true);
    }
    for (k, cells) in &horizontal {
        runs(*k, cells, false);
    }
    d
}

fn draw_boundaries(svg: &mut Svg, view: &PartitionView<'_>, frame: &Frame, attrs: &str) {
    match view {
        PartitionView::Grid(g) => {
            let d = grid_boundary_path(g, frame);
            if !d.is_empty() {
                svg.path(&d, &format!(r#"fill="none" {attrs}"#));
            }
        }
        PartitionView::Cells { cells, .. } => {
            for cell in cells.iter() {
                let pts: Vec<[f64; 2]> = cell.polygon.iter().map(|&p| frame.map(p)).collect();
                svg.polygon(&pts, &format!(r#"fill="none" {attrs}"#));
            }
        }
    }
}

/// Render the request to an SVG document.
pub fn partition_svg(req: &RenderRequest<'_>, mode: RenderMode) -> String {
    let size = f64::from(req.size);
    let frame = Frame {
        domain: req.view.domain(),
        size,
    };
    let mut svg = Svg::new(size, size);
    svg.raw(r#"<g shape-rendering="crispEdges">"#);
    draw_fill(&mut svg, req, mode, &frame);
    svg.raw("</g>");
    if mode == RenderMode::LayerOverlay {
        let layers = req.overlays.len();
        for (i, overlay) in req.overlays.iter().enumerate() {
            // coarser layers get heavier strokes
            let width = 0.8 + 1.6 * (layers - i) as f64 / layers as f64;
            let attrs = format!(
                r##"stroke="#202020" stroke-opacity="0.85" stroke-width="{}""##,
                crate::svg::num(width)
            );
            draw_boundaries(&mut svg, overlay, &frame, &attrs);
        }
        draw_boundaries(
            &mut svg,
            &req.view,
            &frame,
            r##"stroke="#202020" stroke-opacity="0.5" stroke-width="0.50""##,
        );
    }
    if let Some(ds) = req.points {
        for (i, row) in ds.rows().enumerate() {
            if row.len() < 2 {
                break;
            }
            let p = frame.map([row[0], row[1]]);
            svg.circle(
                p,
                1.5,
                &format!(r#"fill="{}" fill-opacity="0.6""#, hex(class_color(ds.label(i)))),
            );
        }
    }
    svg.finish()
}

/// Write the rendered SVG to `path`.
pub fn render_partition_svg(
    req: &RenderRequest<'_>,
    mode: RenderMode,
    path: impl AsRef<Path>,
) -> std::io::Result<()> {
    std::fs::write(path, partition_svg(req, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::{label_grid, tests::stump};

    fn fills(svg: &str) -> std::collections::BTreeSet<String> {
        svg.split("fill=\"")
            .skip(1)
            .map(|s| s[..7].to_string())
            .filter(|s| s.starts_with('#'))
            .collect()
    }

    #[test]
    fn stump_grid_has_two_colors() {
        let g = label_grid(&stump(), &Box2::new([0.0, 0.0], [1.0, 1.0]), 8, 1).unwrap();
        let svg = partition_svg(&RenderRequest::new(PartitionView::Grid(&g)), RenderMode::UniqueColor);
        assert_eq!(fills(&svg).len(), 2);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let g = label_grid(&stump(), &Box2::new([0.0, 0.0], [1.0, 1.0]), 8, 1).unwrap();
        let a = partition_svg(&RenderRequest::new(PartitionView::Grid(&g)), RenderMode::LayerOverlay);
        let b = partition_svg(&RenderRequest::new(PartitionView::Grid(&g)), RenderMode::LayerOverlay);
        assert_eq!(a, b);
    }

    #[test]
    fn tint_follows_posterior() {
        let purple = tint_color(&CellStats::from_counts(vec![5, 0]));
        let green = tint_color(&CellStats::from_counts(vec![0, 5]));
        assert_eq!(purple, PALETTE[0]);
        assert_eq!(green, PALETTE[1]);
        assert_eq!(tint_color(&CellStats::from_counts(vec![0, 0])), NEUTRAL);
        assert_eq!(RenderMode::from_str("class-tint"), Ok(RenderMode::ClassTint));
    }
}
