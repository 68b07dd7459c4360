//! Region shapes, closed-set containment, and exact boundary crossings of
//! linearly interpolated trajectory segments.
//!
//! Every supported shape is convex, so the set of parameters at which a line
//! lies inside a region is a single closed interval. Crossing computation
//! reduces to clipping that interval against the segment and snapping its
//! ends to the segment endpoints when they fall within [`EPS`] of them.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used for boundary tests and for snapping crossing
/// times onto segment endpoints.
pub const EPS: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("unsupported dimension {0}; only 1 and 2 are supported")]
    UnsupportedDimension(usize),
    #[error("non-finite coordinate")]
    NonFinite,
    #[error("invalid region {id}: {reason}")]
    InvalidRegion { id: RegionId, reason: String },
    #[error("duplicate region id {0}")]
    DuplicateId(RegionId),
    #[error("empty region set")]
    EmptyRegionSet,
}

/// Identifier of a region within one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RegionId(pub u32);

impl fmt::Display for RegionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A point of the line or of the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point {
    coords: [f64; 2],
    dim: u8,
}

impl Point {
    pub fn one(x: f64) -> Self {
        Point {
            coords: [x, 0.0],
            dim: 1,
        }
    }

    pub fn two(x: f64, y: f64) -> Self {
        Point {
            coords: [x, y],
            dim: 2,
        }
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self, GeometryError> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite);
        }
        match *coords {
            [x] => Ok(Point::one(x)),
            [x, y] => Ok(Point::two(x, y)),
            _ => Err(GeometryError::UnsupportedDimension(coords.len())),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords[..self.dim()]
    }

    pub fn x(&self) -> f64 {
        self.coords[0]
    }

    pub fn y(&self) -> f64 {
        self.coords[1]
    }

    pub fn is_finite(&self) -> bool {
        self.coords().iter().all(|c| c.is_finite())
    }

    /// Linear interpolation `a + s (b - a)`.
    pub fn lerp(a: &Point, b: &Point, s: f64) -> Point {
        let mut coords = [0.0; 2];
        for (i, c) in coords.iter_mut().enumerate().take(a.dim()) {
            *c = a.coords[i] + s * (b.coords[i] - a.coords[i]);
        }
        Point { coords, dim: a.dim }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        self.coords()
            .iter()
            .zip(other.coords())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = GeometryError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Point::from_slice(&v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Self {
        p.coords().to_vec()
    }
}

/// Geometric shape of a closed region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum RegionShape {
    Interval {
        lo: f64,
        hi: f64,
    },
    Disk {
        center: Point,
        radius: f64,
    },
    /// Strictly convex polygon, vertices in counterclockwise order.
    Polygon {
        vertices: Vec<Point>,
    },
}

impl RegionShape {
    pub fn dim(&self) -> usize {
        match self {
            RegionShape::Interval { .. } => 1,
            _ => 2,
        }
    }

    fn check(&self) -> Result<(), String> {
        match self {
            RegionShape::Interval { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite()) {
                    return Err("non-finite endpoint".into());
                }
                if lo >= hi {
                    return Err(format!("interval needs lo < hi, got [{lo}, {hi}]"));
                }
            }
            RegionShape::Disk { center, radius } => {
                if center.dim() != 2 || !center.is_finite() {
                    return Err("disk center must be a finite planar point".into());
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(format!("disk radius must be positive, got {radius}"));
                }
            }
            RegionShape::Polygon { vertices } => {
                if vertices.len() < 3 {
                    return Err("polygon needs at least three vertices".into());
                }
                if vertices.iter().any(|v| v.dim() != 2 || !v.is_finite()) {
                    return Err("polygon vertices must be finite planar points".into());
                }
                let n = vertices.len();
                for i in 0..n {
                    let (a, b, c) = (&vertices[i], &vertices[(i + 1) % n], &vertices[(i + 2) % n]);
                    if a.distance(b) <= EPS {
                        return Err(format!("repeated vertex at index {}", (i + 1) % n));
                    }
                    if orient(a, b, c) <= EPS {
                        return Err(format!(
                            "vertices must be strictly convex and counterclockwise (corner {})",
                            (i + 1) % n
                        ));
                    }
                }
                // A strictly left-turning closed chain can still wind more than once.
                let turning: f64 = (0..n)
                    .map(|i| {
                        let (a, b, c) =
                            (&vertices[i], &vertices[(i + 1) % n], &vertices[(i + 2) % n]);
                        let (ux, uy) = (b.x() - a.x(), b.y() - a.y());
                        let (vx, vy) = (c.x() - b.x(), c.y() - b.y());
                        (ux * vy - uy * vx).atan2(ux * vx + uy * vy)
                    })
                    .sum();
                if (turning - std::f64::consts::TAU).abs() > 1e-6 {
                    return Err("polygon winds more than once".into());
                }
            }
        }
        Ok(())
    }

    /// A point in the interior of the shape.
    pub fn interior_point(&self) -> Point {
        match self {
            RegionShape::Interval { lo, hi } => Point::one(0.5 * (lo + hi)),
            RegionShape::Disk { center, .. } => *center,
            RegionShape::Polygon { vertices } => {
                let n = vertices.len() as f64;
                let (sx, sy) = vertices
                    .iter()
                    .fold((0.0, 0.0), |(sx, sy), v| (sx + v.x(), sy + v.y()));
                Point::two(sx / n, sy / n)
            }
        }
    }
}

/// An identified closed region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRegion")]
pub struct Region {
    pub id: RegionId,
    pub shape: RegionShape,
}

#[derive(Deserialize)]
struct RawRegion {
    id: RegionId,
    shape: RegionShape,
}

impl TryFrom<RawRegion> for Region {
    type Error = GeometryError;

    fn try_from(raw: RawRegion) -> Result<Self, Self::Error> {
        Region::new(raw.id, raw.shape)
    }
}

impl Region {
    pub fn new(id: RegionId, shape: RegionShape) -> Result<Self, GeometryError> {
        shape
            .check()
            .map_err(|reason| GeometryError::InvalidRegion { id, reason })?;
        Ok(Region { id, shape })
    }

    pub fn interval(id: u32, lo: f64, hi: f64) -> Result<Self, GeometryError> {
        Region::new(RegionId(id), RegionShape::Interval { lo, hi })
    }

    pub fn disk(id: u32, center: Point, radius: f64) -> Result<Self, GeometryError> {
        Region::new(RegionId(id), RegionShape::Disk { center, radius })
    }

    pub fn polygon(id: u32, vertices: Vec<Point>) -> Result<Self, GeometryError> {
        Region::new(RegionId(id), RegionShape::Polygon { vertices })
    }

    pub fn dim(&self) -> usize {
        self.shape.dim()
    }

    /// Closed containment with tolerance [`EPS`].
    pub fn contains(&self, p: &Point) -> Result<bool, GeometryError> {
        self.check_dim(p)?;
        Ok(self.signed_depth(p) >= -EPS)
    }

    /// Signed distance-like depth: positive inside, negative outside, zero on
    /// the boundary. Exact Euclidean distance for intervals and disks; for
    /// polygons the minimum over edges of the signed distance to the edge line.
    pub fn signed_depth(&self, p: &Point) -> f64 {
        match &self.shape {
            RegionShape::Interval { lo, hi } => (p.x() - lo).min(hi - p.x()),
            RegionShape::Disk { center, radius } => radius - p.distance(center),
            RegionShape::Polygon { vertices } => {
                let n = vertices.len();
                (0..n)
                    .map(|i| {
                        let (a, b) = (&vertices[i], &vertices[(i + 1) % n]);
                        orient(a, b, p) / a.distance(b)
                    })
                    .fold(f64::INFINITY, f64::min)
            }
        }
    }

    fn check_dim(&self, p: &Point) -> Result<(), GeometryError> {
        if p.dim() != self.dim() {
            return Err(GeometryError::DimensionMismatch {
                expected: self.dim(),
                found: p.dim(),
            });
        }
        Ok(())
    }

    /// Closed parameter range `[a, b]` (possibly unbounded) of the line
    /// `p0 + s (p1 - p0)` that lies inside the region, or `None` if the line
    /// misses it. A stationary line is either inside for every `s` or never.
    fn line_range(&self, p0: &Point, p1: &Point) -> Option<(f64, f64)> {
        let stationary = p0.distance(p1)
            <= f64::EPSILON * (1.0 + p0.coords().iter().map(|c| c.abs()).sum::<f64>());
        if stationary {
            return (self.signed_depth(p0) >= -EPS).then_some((f64::NEG_INFINITY, f64::INFINITY));
        }
        match &self.shape {
            RegionShape::Interval { lo, hi } => {
                let (x0, dx) = (p0.x(), p1.x() - p0.x());
                let (s_lo, s_hi) = ((lo - x0) / dx, (hi - x0) / dx);
                Some((s_lo.min(s_hi), s_lo.max(s_hi)))
            }
            RegionShape::Disk { center, radius } => {
                let (dx, dy) = (p1.x() - p0.x(), p1.y() - p0.y());
                let (fx, fy) = (p0.x() - center.x(), p0.y() - center.y());
                let a = dx * dx + dy * dy;
                let half_b = dx * fx + dy * fy;
                let c = fx * fx + fy * fy - radius * radius;
                let disc = half_b * half_b - a * c;
                if disc <= 0.0 {
                    return None;
                }
                let root = disc.sqrt();
                // Numerically stable pair of roots; q != 0 because root > 0.
                let sign = if half_b >= 0.0 { 1.0 } else { -1.0 };
                let q = -(half_b + sign * root);
                let (r1, r2) = (q / a, c / q);
                Some((r1.min(r2), r1.max(r2)))
            }
            RegionShape::Polygon { vertices } => {
                let n = vertices.len();
                let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
                let (dx, dy) = (p1.x() - p0.x(), p1.y() - p0.y());
                for i in 0..n {
                    let (a, b) = (&vertices[i], &vertices[(i + 1) % n]);
                    let (ex, ey) = (b.x() - a.x(), b.y() - a.y());
                    let len = (ex * ex + ey * ey).sqrt();
                    // Inside the edge's half-plane iff num + s * den >= 0.
                    let num = (ex * (p0.y() - a.y()) - ey * (p0.x() - a.x())) / len;
                    let den = (ex * dy - ey * dx) / len;
                    if den.abs() <= f64::EPSILON * (dx.abs() + dy.abs()) {
                        if num < -EPS {
                            return None;
                        }
                        continue;
                    }
                    let s = -num / den;
                    if den > 0.0 {
                        lo = lo.max(s);
                    } else {
                        hi = hi.min(s);
                    }
                }
                (lo <= hi).then_some((lo, hi))
            }
        }
    }
}

/// Validates a scenario's region set: nonempty, unique ids, one dimension.
pub fn check_region_set(regions: &[Region]) -> Result<usize, GeometryError> {
    let first = regions.first().ok_or(GeometryError::EmptyRegionSet)?;
    let dim = first.dim();
    let mut seen = BTreeSet::new();
    for r in regions {
        if r.dim() != dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                found: r.dim(),
            });
        }
        if !seen.insert(r.id) {
            return Err(GeometryError::DuplicateId(r.id));
        }
    }
    Ok(dim)
}

/// Orientation determinant of `(a, b, c)`: positive for a left turn.
fn orient(a: &Point, b: &Point, c: &Point) -> f64 {
    (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrossingKind {
    // Declaration order is the tie-break order: exits sort before enters.
    Exit,
    Enter,
}

impl fmt::Display for CrossingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CrossingKind::Exit => "exit",
            CrossingKind::Enter => "enter",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crossing {
    pub time: f64,
    pub kind: CrossingKind,
}

/// Directed, timestamped segment with linear interpolation in time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t0: f64,
    pub p0: Point,
    pub t1: f64,
    pub p1: Point,
}

impl Segment {
    pub fn new(t0: f64, p0: Point, t1: f64, p1: Point) -> Self {
        Segment { t0, p0, t1, p1 }
    }

    pub fn position(&self, t: f64) -> Point {
        if t <= self.t0 {
            return self.p0;
        }
        if t >= self.t1 {
            return self.p1;
        }
        Point::lerp(&self.p0, &self.p1, (t - self.t0) / (self.t1 - self.t0))
    }
}

/// Containment of one region along one segment.
///
/// `starts_inside` is the state immediately after `t0` and `ends_inside` the
/// state immediately before `t1`; `crossings` are the state changes strictly
/// between them. A contact of zero duration is not a change of state.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentProfile {
    pub starts_inside: bool,
    pub ends_inside: bool,
    pub crossings: Vec<Crossing>,
}

pub fn segment_profile(region: &Region, seg: &Segment) -> Result<SegmentProfile, GeometryError> {
    region.check_dim(&seg.p0)?;
    region.check_dim(&seg.p1)?;
    let empty = SegmentProfile {
        starts_inside: false,
        ends_inside: false,
        crossings: Vec::new(),
    };
    let dt = seg.t1 - seg.t0;
    if !(dt > 0.0) {
        return Ok(empty);
    }
    let Some((a, b)) = region.line_range(&seg.p0, &seg.p1) else {
        return Ok(empty);
    };
    let snap = |s: f64| -> f64 {
        let t = seg.t0 + s.clamp(0.0, 1.0) * dt;
        if t - seg.t0 < EPS {
            seg.t0
        } else if seg.t1 - t < EPS {
            seg.t1
        } else {
            t
        }
    };
    let (enter, exit) = (snap(a), snap(b));
    if exit - enter < EPS {
        return Ok(empty);
    }
    let mut crossings = Vec::with_capacity(2);
    if enter > seg.t0 {
        crossings.push(Crossing {
            time: enter,
            kind: CrossingKind::Enter,
        });
    }
    if exit < seg.t1 {
        crossings.push(Crossing {
            time: exit,
            kind: CrossingKind::Exit,
        });
    }
    Ok(SegmentProfile {
        starts_inside: enter == seg.t0,
        ends_inside: exit == seg.t1,
        crossings,
    })
}

/// Boundary crossings of `region` strictly inside the open time span of
/// `seg`, in increasing time order. Kinds alternate starting from the
/// containment state immediately after `t0`. A crossing that lands within
/// [`EPS`] of an endpoint is snapped onto it and left to the caller that
/// joins consecutive segments.
pub fn crossing_times(region: &Region, seg: &Segment) -> Result<Vec<Crossing>, GeometryError> {
    Ok(segment_profile(region, seg)?.crossings)
}

/// Number of regions containing `p`.
pub fn depth(regions: &[Region], p: &Point) -> Result<usize, GeometryError> {
    let mut n = 0;
    for r in regions {
        if r.contains(p)? {
            n += 1;
        }
    }
    Ok(n)
}

/// Maximum number of regions covering any single point.
///
/// The maximum depth region is the intersection of convex closed sets; its
/// boundary either has a vertex (a pairwise boundary intersection or a
/// polygon corner) or it equals one whole region, whose interior sample is
/// then a witness. Depth is evaluated exactly at that finite candidate set.
pub fn ply(regions: &[Region]) -> Result<usize, GeometryError> {
    let dim = check_region_set(regions)?;
    let mut candidates = Vec::new();
    for r in regions {
        candidates.push(r.shape.interior_point());
        match &r.shape {
            RegionShape::Interval { lo, hi } => {
                candidates.push(Point::one(*lo));
                candidates.push(Point::one(*hi));
            }
            RegionShape::Polygon { vertices } => candidates.extend(vertices.iter().copied()),
            RegionShape::Disk { .. } => {}
        }
    }
    if dim == 2 {
        for (i, a) in regions.iter().enumerate() {
            for b in &regions[i + 1..] {
                candidates.extend(boundary_intersections(&a.shape, &b.shape));
            }
        }
    }
    let mut best = 0;
    for p in &candidates {
        best = best.max(depth(regions, p)?);
    }
    Ok(best)
}

fn polygon_edges(vertices: &[Point]) -> impl Iterator<Item = (Point, Point)> + '_ {
    let n = vertices.len();
    (0..n).map(move |i| (vertices[i], vertices[(i + 1) % n]))
}

/// Intersection points of the boundaries of two planar shapes.
pub fn boundary_intersections(a: &RegionShape, b: &RegionShape) -> Vec<Point> {
    use RegionShape::*;
    match (a, b) {
        (
            Disk {
                center: c1,
                radius: r1,
            },
            Disk {
                center: c2,
                radius: r2,
            },
        ) => circle_circle(c1, *r1, c2, *r2),
        (Disk { center, radius }, Polygon { vertices })
        | (Polygon { vertices }, Disk { center, radius }) => polygon_edges(vertices)
            .flat_map(|(p, q)| circle_segment(center, *radius, &p, &q))
            .collect(),
        (Polygon { vertices: va }, Polygon { vertices: vb }) => {
            let mut out = Vec::new();
            for (p, q) in polygon_edges(va) {
                for (r, s) in polygon_edges(vb) {
                    out.extend(segment_segment(&p, &q, &r, &s));
                }
            }
            out
        }
        _ => Vec::new(),
    }
}

fn circle_circle(c1: &Point, r1: f64, c2: &Point, r2: f64) -> Vec<Point> {
    let d = c1.distance(c2);
    if d == 0.0 || d > r1 + r2 || d < (r1 - r2).abs() {
        return Vec::new();
    }
    let a = (r1 * r1 - r2 * r2 + d * d) / (2.0 * d);
    let h = (r1 * r1 - a * a).max(0.0).sqrt();
    let (ux, uy) = ((c2.x() - c1.x()) / d, (c2.y() - c1.y()) / d);
    let (mx, my) = (c1.x() + a * ux, c1.y() + a * uy);
    vec![
        Point::two(mx - h * uy, my + h * ux),
        Point::two(mx + h * uy, my - h * ux),
    ]
}

fn circle_segment(c: &Point, r: f64, p: &Point, q: &Point) -> Vec<Point> {
    let (dx, dy) = (q.x() - p.x(), q.y() - p.y());
    let (fx, fy) = (p.x() - c.x(), p.y() - c.y());
    let a = dx * dx + dy * dy;
    let b = 2.0 * (dx * fx + dy * fy);
    let cc = fx * fx + fy * fy - r * r;
    let disc = b * b - 4.0 * a * cc;
    if a == 0.0 || disc < 0.0 {
        return Vec::new();
    }
    let root = disc.sqrt();
    [(-b - root) / (2.0 * a), (-b + root) / (2.0 * a)]
        .into_iter()
        .filter(|s| (-EPS..=1.0 + EPS).contains(s))
        .map(|s| Point::lerp(p, q, s))
        .collect()
}

fn segment_segment(p: &Point, q: &Point, r: &Point, s: &Point) -> Option<Point> {
    let (ux, uy) = (q.x() - p.x(), q.y() - p.y());
    let (vx, vy) = (s.x() - r.x(), s.y() - r.y());
    let den = ux * vy - uy * vx;
    if den.abs() < f64::EPSILON {
        // Parallel or collinear: overlap endpoints are polygon vertices,
        // which are already candidates.
        return None;
    }
    let (wx, wy) = (r.x() - p.x(), r.y() - p.y());
    let t = (wx * vy - wy * vx) / den;
    let u = (wx * uy - wy * ux) / den;
    ((-EPS..=1.0 + EPS).contains(&t) && (-EPS..=1.0 + EPS).contains(&u))
        .then(|| Point::lerp(p, q, t))
}
