use std::collections::{BTreeMap, BTreeSet};

use crate::events::{coverage_timeline, event_stream, EventKind, Trajectory};
use crate::geometry::{boundary_intersections, Point, Region, RegionId};
use crate::offline::{greedy_offline, validate, TrackingSequence};

use super::AdversaryError;

/// Two-region cells adjacent to the common cell, as index pairs into
/// `a, b, c, d`. The pair `bd` is absent.
pub const RHOMBI_EDGES: [(usize, usize); 5] = [(0, 1), (0, 2), (0, 3), (1, 2), (2, 3)];

const LABELS: [char; 4] = ['a', 'b', 'c', 'd'];
const HALF_DIAGONALS: (f64, f64) = (1.0, 0.6);
/// Center and rotation of each rhombus.
const PLACEMENT: [(f64, f64, f64); 4] = [
    (-0.17, 0.32, 1.81),
    (0.26, 0.12, 2.54),
    (0.31, 0.01, 2.86),
    (0.03, -0.26, 1.82),
];
const ESCAPE: f64 = 0.02;
const MARGIN: f64 = 1e-4;

/// Four similar rhombi whose common cell touches the five cells of
/// `RHOMBI_EDGES`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rhombi {
    pub regions: Vec<Region>,
    /// Point inside all four rhombi.
    pub core: Point,
    /// Corner shared by the common cell and cell `xy`: the crossing of the
    /// boundaries of the two rhombi other than `x` and `y`.
    pub corners: BTreeMap<(usize, usize), Point>,
    /// Point just inside cell `xy`, on the ray from `core` through its corner.
    pub cells: BTreeMap<(usize, usize), Point>,
}

impl Rhombi {
    pub fn label(i: usize) -> char {
        LABELS[i]
    }

    pub fn cell_name(x: usize, y: usize) -> String {
        let (x, y) = (x.min(y), x.max(y));
        format!("{}{}", LABELS[x], LABELS[y])
    }

    /// Representative point of every named cell.
    pub fn atlas(&self) -> Vec<(String, Point)> {
        std::iter::once(("abcd".to_string(), self.core))
            .chain(
                self.cells
                    .iter()
                    .map(|(&(x, y), &p)| (Rhombi::cell_name(x, y), p)),
            )
            .collect()
    }

    fn corner(&self, x: usize, y: usize) -> Point {
        self.corners[&(x.min(y), x.max(y))]
    }

    fn cell(&self, x: usize, y: usize) -> Point {
        self.cells[&(x.min(y), x.max(y))]
    }
}

fn rhombus(id: u32, (cx, cy, theta): (f64, f64, f64)) -> Result<Region, AdversaryError> {
    let (w, h) = HALF_DIAGONALS;
    let (s, c) = theta.sin_cos();
    let vertices = [(w, 0.0), (0.0, h), (-w, 0.0), (0.0, -h)]
        .into_iter()
        .map(|(x, y)| Point::two(cx + x * c - y * s, cy + x * s + y * c))
        .collect();
    Ok(Region::polygon(id, vertices)?)
}

fn absent(x: usize, y: usize) -> [usize; 2] {
    let mut rest = (0..4).filter(|&i| i != x && i != y);
    [rest.next().unwrap(), rest.next().unwrap()]
}

pub fn rhombi_construction() -> Result<Rhombi, AdversaryError> {
    let regions = PLACEMENT
        .iter()
        .enumerate()
        .map(|(i, &p)| rhombus(i as u32, p))
        .collect::<Result<Vec<_>, _>>()?;
    let mut corners = BTreeMap::new();
    for &(x, y) in &RHOMBI_EDGES {
        let [u, v] = absent(x, y);
        let depth = |p: &Point| regions[x].signed_depth(p).min(regions[y].signed_depth(p));
        let q = boundary_intersections(&regions[u].shape, &regions[v].shape)
            .into_iter()
            .max_by(|p, q| depth(p).total_cmp(&depth(q)))
            .ok_or_else(|| {
                AdversaryError::SelfCheck(format!(
                    "rhombi {} and {} do not cross",
                    LABELS[u], LABELS[v]
                ))
            })?;
        corners.insert((x, y), q);
    }
    let n = corners.len() as f64;
    let (sx, sy) = corners
        .values()
        .fold((0.0, 0.0), |(a, b), p| (a + p.x(), b + p.y()));
    let core = Point::two(sx / n, sy / n);
    let cells = corners
        .iter()
        .map(|(&k, q)| {
            let (dx, dy) = (q.x() - core.x(), q.y() - core.y());
            let len = dx.hypot(dy);
            (
                k,
                Point::two(q.x() + ESCAPE * dx / len, q.y() + ESCAPE * dy / len),
            )
        })
        .collect();
    let rhombi = Rhombi {
        regions,
        core,
        corners,
        cells,
    };
    self_check(&rhombi)?;
    Ok(rhombi)
}

fn self_check(r: &Rhombi) -> Result<(), AdversaryError> {
    let fail = |msg: String| Err(AdversaryError::SelfCheck(msg));
    if r.regions.iter().any(|g| g.signed_depth(&r.core) <= MARGIN) {
        return fail("core point is not inside all four rhombi".into());
    }
    for &(x, y) in &RHOMBI_EDGES {
        let name = Rhombi::cell_name(x, y);
        let cell = r.cell(x, y);
        for (i, g) in r.regions.iter().enumerate() {
            let d = g.signed_depth(&cell);
            let want_inside = i == x || i == y;
            if (want_inside && d <= MARGIN) || (!want_inside && d >= -MARGIN) {
                return fail(format!(
                    "cell {name} point has wrong containment for rhombus {}",
                    LABELS[i]
                ));
            }
        }
        // Walking from the core through the corner into the cell must exit
        // exactly the two absent rhombi, both at the corner.
        let t = Trajectory::unit_timed(0.0, [r.core, r.corner(x, y), cell])?;
        let stream = event_stream(&r.regions, &t)?;
        let exits: BTreeSet<u32> = stream
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Exit && e.time == 1.0)
            .map(|e| e.region_id.0)
            .collect();
        let want: BTreeSet<u32> = absent(x, y).iter().map(|&i| i as u32).collect();
        if stream.initial_inside.len() != 4 || stream.events.len() != 2 || exits != want {
            return fail(format!("cell {name} is not adjacent to the common cell"));
        }
    }
    Ok(())
}

/// Chooses a region from the location and containing set alone.
pub trait StatelessPolicy {
    fn choose(&self, point: &Point, containing: &BTreeSet<RegionId>) -> RegionId;
}

/// Containing region whose interior reference point is closest; ties by id.
#[derive(Debug, Clone)]
pub struct NearestCenterPolicy {
    centers: BTreeMap<RegionId, Point>,
}

impl NearestCenterPolicy {
    pub fn new(regions: &[Region]) -> Self {
        NearestCenterPolicy {
            centers: regions
                .iter()
                .map(|r| (r.id, r.shape.interior_point()))
                .collect(),
        }
    }
}

impl StatelessPolicy for NearestCenterPolicy {
    fn choose(&self, point: &Point, containing: &BTreeSet<RegionId>) -> RegionId {
        *containing
            .iter()
            .min_by(|a, b| {
                let da = self
                    .centers
                    .get(a)
                    .map_or(f64::INFINITY, |c| c.distance(point));
                let db = self
                    .centers
                    .get(b)
                    .map_or(f64::INFINITY, |c| c.distance(point));
                da.total_cmp(&db).then(a.cmp(b))
            })
            .expect("nonempty containing set")
    }
}

#[derive(Debug, Clone)]
pub struct StatelessRun {
    pub regions: Vec<Region>,
    pub trajectory: Trajectory,
    pub solution: TrackingSequence,
    pub alg_cost: usize,
    pub opt_cost: usize,
    /// The rhombus with two outgoing edges and the two targets it oscillates between.
    pub pivot: (usize, usize, usize),
}

impl StatelessRun {
    pub fn ratio(&self) -> f64 {
        self.alg_cost as f64 / self.opt_cost as f64
    }
}

fn checked_choice(
    policy: &dyn StatelessPolicy,
    point: &Point,
    containing: &BTreeSet<RegionId>,
) -> Result<RegionId, AdversaryError> {
    let pick = policy.choose(point, containing);
    if !containing.contains(&pick) {
        return Err(AdversaryError::InvalidPolicy(format!(
            "chose region {pick} outside the containing set"
        )));
    }
    if policy.choose(point, containing) != pick {
        return Err(AdversaryError::InvalidPolicy(
            "repeated query gave a different answer".into(),
        ));
    }
    Ok(pick)
}

/// Orients each edge `xy` toward the region the policy picks at the corner
/// of cell `xy`, finds a rhombus `x` with two outgoing edges `xy` and `xz`,
/// and moves back and forth between the two cells `rounds` times.
pub fn run_stateless_adversary(
    policy: &dyn StatelessPolicy,
    rounds: usize,
) -> Result<StatelessRun, AdversaryError> {
    let r = rhombi_construction()?;
    let id = |i: usize| r.regions[i].id;
    let mut out: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(x, y) in &RHOMBI_EDGES {
        let pick = checked_choice(policy, &r.corner(x, y), &BTreeSet::from([id(x), id(y)]))?;
        let (from, to) = if pick == id(y) { (x, y) } else { (y, x) };
        out.entry(from).or_default().push(to);
    }
    let (x, targets) = out
        .into_iter()
        .find(|(_, t)| t.len() >= 2)
        .ok_or_else(|| AdversaryError::SelfCheck("no rhombus has two outgoing edges".into()))?;
    let (y, z) = (targets[0], targets[1]);

    let visit = |a: usize, b: usize| [r.corner(a, b), r.cell(a, b), r.corner(a, b), r.core];
    let mut points = vec![r.corner(x, y), r.cell(x, y), r.corner(x, y), r.core];
    for _ in 0..rounds {
        points.extend(visit(x, z));
        points.extend(visit(x, y));
    }
    let trajectory = Trajectory::unit_timed(0.0, points)?;
    let stream = event_stream(&r.regions, &trajectory)?;

    let mut inside = stream.initial_inside.clone();
    let mut seq = TrackingSequence {
        pairs: vec![(
            stream.start_time,
            checked_choice(policy, &stream.start_point, &inside)?,
        )],
    };
    for batch in stream.batches() {
        let t = batch[0].time;
        let mut lost = false;
        for e in batch {
            match e.kind {
                EventKind::Exit => {
                    inside.remove(&e.region_id);
                    lost |= Some(e.region_id) == seq.last_region();
                }
                EventKind::Enter => {
                    inside.insert(e.region_id);
                }
            }
        }
        if lost {
            let pick = checked_choice(policy, &trajectory.position_at(t), &inside)?;
            if seq.last_region() != Some(pick) {
                seq.pairs.push((t, pick));
            }
        }
    }
    validate(&r.regions, &trajectory, &seq, true)?;
    let opt_cost = greedy_offline(&coverage_timeline(&r.regions, &trajectory)?)?.cost();
    Ok(StatelessRun {
        alg_cost: seq.cost(),
        regions: r.regions,
        trajectory,
        solution: seq,
        opt_cost,
        pivot: (x, y, z),
    })
}
