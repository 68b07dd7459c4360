#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use handover_core::events::{event_stream, CoverageTimeline, Trajectory};
use handover_core::geometry::{Point, Region, RegionId, RegionShape};
use handover_core::harness::{random_scenario, RandomParams, ShapeKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Expected number of uniform picks until the last-exiting of `q`
/// candidates is held, from `E_q = 1 + (1/q)·Σ_{j<q} E_j`.
pub fn harmonic_recurrence(q: usize) -> f64 {
    let mut e = vec![0.0f64];
    for n in 1..=q {
        let sum: f64 = e.iter().sum();
        e.push(1.0 + sum / n as f64);
    }
    e[q]
}

/// Closed containment intervals of one linear piece, solved directly.
fn piece_containment(
    shape: &RegionShape,
    t0: f64,
    p0: &Point,
    t1: f64,
    p1: &Point,
) -> Option<(f64, f64)> {
    let dt = t1 - t0;
    match shape {
        RegionShape::Interval { lo, hi } => {
            let (x0, v) = (p0.x(), (p1.x() - p0.x()) / dt);
            if v == 0.0 {
                return (x0 >= *lo && x0 <= *hi).then_some((t0, t1));
            }
            let (a, b) = ((lo - x0) / v, (hi - x0) / v);
            let (a, b) = (a.min(b), a.max(b));
            let (a, b) = (t0 + a.max(0.0), t0 + b.min(dt));
            (a <= b).then_some((a, b))
        }
        RegionShape::Disk { center, radius } => {
            let (dx, dy) = (p0.x() - center.x(), p0.y() - center.y());
            let (vx, vy) = ((p1.x() - p0.x()) / dt, (p1.y() - p0.y()) / dt);
            let a = vx * vx + vy * vy;
            let b = 2.0 * (dx * vx + dy * vy);
            let c = dx * dx + dy * dy - radius * radius;
            if a == 0.0 {
                return (c <= 0.0).then_some((t0, t1));
            }
            let disc = b * b - 4.0 * a * c;
            if disc < 0.0 {
                return None;
            }
            let r = disc.sqrt();
            let (s0, s1) = ((-b - r) / (2.0 * a), (-b + r) / (2.0 * a));
            let (s0, s1) = (s0.max(0.0), s1.min(dt));
            (s0 <= s1).then_some((t0 + s0, t0 + s1))
        }
        RegionShape::Polygon { .. } => {
            panic!("reference containment covers intervals and disks only")
        }
    }
}

/// Containment timeline computed without the library's event extraction.
pub fn reference_timeline(regions: &[Region], traj: &Trajectory) -> CoverageTimeline {
    let samples = traj.samples();
    let mut map: BTreeMap<RegionId, Vec<(f64, f64)>> = BTreeMap::new();
    for r in regions {
        let list = map.entry(r.id).or_default();
        if samples.len() == 1 {
            let (t, p) = &samples[0];
            if r.signed_depth(p) >= 0.0 {
                list.push((*t, *t));
            }
            continue;
        }
        for w in samples.windows(2) {
            if let Some(iv) = piece_containment(&r.shape, w[0].0, &w[0].1, w[1].0, &w[1].1) {
                list.push(iv);
            }
        }
    }
    CoverageTimeline::from_intervals(traj.start_time(), traj.end_time(), map)
}

/// Fewest containment intervals chaining from the start to the end of the
/// horizon, by breadth-first search over the interval graph.
pub fn bfs_min_cover(tl: &CoverageTimeline) -> Option<usize> {
    let nodes: Vec<(f64, f64)> = tl.all_intervals().map(|(_, a, b)| (a, b)).collect();
    let done = |b: f64| b >= tl.end;
    let mut dist = vec![usize::MAX; nodes.len()];
    let mut queue = VecDeque::new();
    for (i, &(a, b)) in nodes.iter().enumerate() {
        if a <= tl.start && (b > tl.start || done(b)) {
            dist[i] = 1;
            queue.push_back(i);
        }
    }
    while let Some(u) = queue.pop_front() {
        let ub = nodes[u].1;
        if done(ub) {
            return Some(dist[u]);
        }
        for (v, &(a, b)) in nodes.iter().enumerate() {
            if dist[v] == usize::MAX && a <= ub && b > ub {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    None
}

/// Random 1D instance with at most 12 intervals and 30 events.
pub fn small_1d(seed: u64) -> (Vec<Region>, Trajectory) {
    small(seed, 1, ShapeKind::Interval, 12)
}

/// Random 2D unit-scale disk instance.
pub fn small_2d(seed: u64) -> (Vec<Region>, Trajectory) {
    small(seed, 2, ShapeKind::Disk, 10)
}

fn small(seed: u64, dimension: usize, shape: ShapeKind, max_n: usize) -> (Vec<Region>, Trajectory) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let n = rng.gen_range(2..=max_n);
        let segments = rng.gen_range(1..=6);
        let p = RandomParams::new(n, dimension, shape, segments);
        let Ok((regions, t)) = random_scenario(rng.gen(), &p) else {
            continue;
        };
        if event_stream(&regions, &t).unwrap().events.len() <= 30 {
            return (regions, t);
        }
    }
}
