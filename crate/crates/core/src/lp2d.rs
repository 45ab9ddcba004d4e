//! Two-variable linear programming by randomized incremental construction.
//!
//! Constraints are processed in a random order; whenever the running
//! optimum violates the next constraint, the new optimum is found by a
//! one-dimensional LP on that constraint's boundary line. Expected time is
//! linear in the number of constraints. A bounding box keeps every problem
//! bounded.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::seed;

/// The closed half-plane `normal . x <= offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalfPlane {
    pub normal: [f64; 2],
    pub offset: f64,
}

impl HalfPlane {
    pub fn new(normal: [f64; 2], offset: f64) -> Self {
        Self { normal, offset }
    }

    pub fn value(&self, x: [f64; 2]) -> f64 {
        self.normal[0] * x[0] + self.normal[1] * x[1]
    }

    /// Signed distance-like slack `offset - normal . x`, unnormalised.
    pub fn slack(&self, x: [f64; 2]) -> f64 {
        self.offset - self.value(x)
    }

    pub fn norm(&self) -> f64 {
        self.normal[0].hypot(self.normal[1])
    }

    pub fn contains_strictly(&self, x: [f64; 2]) -> bool {
        self.slack(x) > 0.0
    }

    /// The half-plane pushed inwards by `margin` (in Euclidean distance).
    pub fn shrunk(&self, margin: f64) -> Self {
        Self {
            normal: self.normal,
            offset: self.offset - margin * self.norm(),
        }
    }

    /// The complementary half-plane `normal . x >= offset`.
    pub fn flipped(&self) -> Self {
        Self {
            normal: [-self.normal[0], -self.normal[1]],
            offset: -self.offset,
        }
    }
}

/// Axis-aligned rectangle `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box2 {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Box2 {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Self {
        Self { min, max }
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.min[0] < self.max[0] && self.min[1] < self.max[1])
            || self.min.iter().chain(&self.max).any(|v| !v.is_finite())
    }

    pub fn halfplanes(&self) -> [HalfPlane; 4] {
        [
            HalfPlane::new([-1.0, 0.0], -self.min[0]),
            HalfPlane::new([1.0, 0.0], self.max[0]),
            HalfPlane::new([0.0, -1.0], -self.min[1]),
            HalfPlane::new([0.0, 1.0], self.max[1]),
        ]
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        (self.min[0]..=self.max[0]).contains(&x[0]) && (self.min[1]..=self.max[1]).contains(&x[1])
    }

    pub fn width(&self) -> f64 {
        self.max[0] - self.min[0]
    }

    pub fn height(&self) -> f64 {
        self.max[1] - self.min[1]
    }

    pub fn center(&self) -> [f64; 2] {
        [
            (self.min[0] + self.max[0]) / 2.0,
            (self.min[1] + self.max[1]) / 2.0,
        ]
    }

    /// Grow every side by `fraction` of the corresponding extent.
    pub fn inflated(&self, fraction: f64) -> Self {
        let (dx, dy) = (self.width() * fraction, self.height() * fraction);
        Self::new(
            [self.min[0] - dx, self.min[1] - dy],
            [self.max[0] + dx, self.max[1] + dy],
        )
    }

    fn scale(&self) -> f64 {
        self.min
            .iter()
            .chain(&self.max)
            .fold(1.0_f64, |acc, v| acc.max(v.abs()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LpOutcome {
    Optimal([f64; 2]),
    Infeasible,
}

const REL_TOL: f64 = 1e-12;

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Maximise `objective . x` over `constraints` intersected with `bounds`.
/// The constraint order is shuffled with a fixed-seed generator, so results
/// are deterministic.
pub fn maximize(objective: [f64; 2], constraints: &[HalfPlane], bounds: &Box2) -> LpOutcome {
    let tol = REL_TOL * bounds.scale();
    let box_planes = bounds.halfplanes();
    // optimum over the box alone: the best corner, ties toward the minimum
    let mut x = [
        if objective[0] > 0.0 { bounds.max[0] } else { bounds.min[0] },
        if objective[1] > 0.0 { bounds.max[1] } else { bounds.min[1] },
    ];

    let mut order: Vec<&HalfPlane> = constraints.iter().collect();
    let mut rng = seed::rng(0x5e1d_e1);
    order.shuffle(&mut rng);

    let mut seen: Vec<HalfPlane> = box_planes.to_vec();
    for h in order {
        let scale = tol * (1.0 + h.norm());
        if h.slack(x) >= -scale {
            seen.push(*h);
            continue;
        }
        match maximize_on_line(objective, h, &seen, tol) {
            Some(p) => x = p,
            None => return LpOutcome::Infeasible,
        }
        seen.push(*h);
    }
    LpOutcome::Optimal(x)
}

/// One-dimensional LP on the boundary line of `line` subject to `previous`.
fn maximize_on_line(
    objective: [f64; 2],
    line: &HalfPlane,
    previous: &[HalfPlane],
    tol: f64,
) -> Option<[f64; 2]> {
    let n = line.normal;
    let nn = dot(n, n);
    if nn == 0.0 {
        // 0 . x <= offset with negative offset
        return None;
    }
    let base = [n[0] * line.offset / nn, n[1] * line.offset / nn];
    let dir = [-n[1], n[0]];
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    for h in previous {
        let a = dot(h.normal, dir);
        let b = h.slack(base);
        let scale = tol * (1.0 + h.norm());
        if a.abs() <= REL_TOL * h.norm() * dir[0].hypot(dir[1]) {
            if b < -scale {
                return None;
            }
        } else if a > 0.0 {
            hi = hi.min(b / a);
        } else {
            lo = lo.max(b / a);
        }
    }
    if lo > hi {
        // allow touching within tolerance
        let gap = (lo - hi) * dir[0].hypot(dir[1]);
        if gap > tol * 10.0 {
            return None;
        }
        let mid = (lo + hi) / 2.0;
        lo = mid;
        hi = mid;
    }
    let slope = dot(objective, dir);
    let t = if slope > 0.0 {
        hi
    } else if slope < 0.0 {
        lo
    } else if lo.is_finite() && hi.is_finite() {
        (lo + hi) / 2.0
    } else if lo.is_finite() {
        lo
    } else if hi.is_finite() {
        hi
    } else {
        0.0
    };
    if !t.is_finite() {
        return None;
    }
    Some([base[0] + t * dir[0], base[1] + t * dir[1]])
}

/// A point of `bounds` lying at Euclidean distance at least `margin` inside
/// every constraint, if one exists.
pub fn feasible_with_margin(constraints: &[HalfPlane], bounds: &Box2, margin: f64) -> Option<[f64; 2]> {
    let shrunk: Vec<HalfPlane> = constraints.iter().map(|h| h.shrunk(margin)).collect();
    match maximize([1.0, 0.5], &shrunk, bounds) {
        LpOutcome::Optimal(x) => {
            let ok = constraints.iter().all(|h| h.contains_strictly(x));
            ok.then_some(x)
        }
        LpOutcome::Infeasible => None,
    }
}

/// Vertices (counter-clockwise) of the convex polygon
/// `bounds ∩ constraints`, by successive half-plane clipping.
pub fn clip_polygon(bounds: &Box2, constraints: &[HalfPlane]) -> Vec<[f64; 2]> {
    let mut poly = vec![
        [bounds.min[0], bounds.min[1]],
        [bounds.max[0], bounds.min[1]],
        [bounds.max[0], bounds.max[1]],
        [bounds.min[0], bounds.max[1]],
    ];
    for h in constraints {
        poly = clip(&poly, h);
        if poly.is_empty() {
            break;
        }
    }
    poly
}

fn clip(poly: &[[f64; 2]], h: &HalfPlane) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        let (sp, sq) = (h.slack(p), h.slack(q));
        if sp >= 0.0 {
            out.push(p);
        }
        if (sp >= 0.0) != (sq >= 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

pub fn polygon_area(poly: &[[f64; 2]]) -> f64 {
    let mut twice = 0.0;
    for i in 0..poly.len() {
        let (p, q) = (poly[i], poly[(i + 1) % poly.len()]);
        twice += p[0] * q[1] - q[0] * p[1];
    }
    twice / 2.0
}

/// Area centroid, falling back to the vertex mean for slivers.
pub fn polygon_centroid(poly: &[[f64; 2]]) -> [f64; 2] {
    let area = polygon_area(poly);
    let n = poly.len() as f64;
    let mean = [
        poly.iter().map(|p| p[0]).sum::<f64>() / n,
        poly.iter().map(|p| p[1]).sum::<f64>() / n,
    ];
    if area.abs() < 1e-300 {
        return mean;
    }
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..poly.len() {
        // shift by the mean for accuracy
        let p = [poly[i][0] - mean[0], poly[i][1] - mean[1]];
        let q = poly[(i + 1) % poly.len()];
        let q = [q[0] - mean[0], q[1] - mean[1]];
        let cross = p[0] * q[1] - q[0] * p[1];
        cx += (p[0] + q[0]) * cross;
        cy += (p[1] + q[1]) * cross;
    }
    [mean[0] + cx / (6.0 * area), mean[1] + cy / (6.0 * area)]
}
