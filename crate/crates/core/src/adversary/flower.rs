use std::f64::consts::TAU;

use crate::events::{coverage_timeline, event_stream, EventBuilder, EventKind, Trajectory};
use crate::geometry::{ply, Point, Region};
use crate::offline::{greedy_offline, validate};
use crate::online::{OnlineError, OnlineTracker, StreamStart};

use super::AdversaryError;

/// Builds a tracker for a given region set.
pub type TrackerFactory<'a> = dyn Fn(&[Region]) -> Result<Box<dyn OnlineTracker>, OnlineError> + 'a;

pub const FLOWER_CENTER_RADIUS: f64 = 0.9;
const INITIAL_DELTA: f64 = 0.05;
const MARGIN: f64 = 1e-6;

/// Unit disks with centers equally spaced on a circle of radius
/// `FLOWER_CENTER_RADIUS` around the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Flower {
    pub regions: Vec<Region>,
    /// The common center, inside every disk.
    pub center: Point,
    /// `cells[i]` lies outside disk `i` and inside all others.
    pub cells: Vec<Point>,
    pub delta: f64,
}

pub fn flower(rho: usize) -> Result<Flower, AdversaryError> {
    if rho < 3 {
        return Err(AdversaryError::Parameter(format!(
            "flower needs at least 3 disks, got {rho}"
        )));
    }
    let dirs: Vec<(f64, f64)> = (0..rho)
        .map(|i| (TAU * i as f64 / rho as f64).sin_cos())
        .map(|(s, c)| (c, s))
        .collect();
    let regions = dirs
        .iter()
        .enumerate()
        .map(|(i, &(ux, uy))| {
            Region::disk(
                i as u32,
                Point::two(FLOWER_CENTER_RADIUS * ux, FLOWER_CENTER_RADIUS * uy),
                1.0,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let center = Point::two(0.0, 0.0);
    let mut delta = INITIAL_DELTA;
    while delta > 1e-12 {
        let off = 1.0 - FLOWER_CENTER_RADIUS + delta;
        let cells: Vec<Point> = dirs
            .iter()
            .map(|&(ux, uy)| Point::two(-off * ux, -off * uy))
            .collect();
        let ok = cells.iter().enumerate().all(|(i, p)| {
            regions.iter().enumerate().all(|(j, g)| {
                let d = g.signed_depth(p);
                if i == j {
                    d < -MARGIN
                } else {
                    d > MARGIN
                }
            })
        });
        if ok {
            let f = Flower {
                regions,
                center,
                cells,
                delta,
            };
            self_check(&f)?;
            return Ok(f);
        }
        delta /= 2.0;
    }
    Err(AdversaryError::SelfCheck(format!(
        "no offset separates the cells of flower({rho})"
    )))
}

fn self_check(f: &Flower) -> Result<(), AdversaryError> {
    let rho = f.regions.len();
    if ply(&f.regions)? != rho {
        return Err(AdversaryError::SelfCheck(
            "ply differs from the disk count".into(),
        ));
    }
    for (i, &cell) in f.cells.iter().enumerate() {
        let t = Trajectory::unit_timed(0.0, [f.center, cell])?;
        let s = event_stream(&f.regions, &t)?;
        let only_exit = s.events.len() == 1
            && s.events[0].kind == EventKind::Exit
            && s.events[0].region_id == f.regions[i].id;
        if s.initial_inside.len() != rho || !only_exit {
            return Err(AdversaryError::SelfCheck(format!(
                "cell {i} is not adjacent to the center cell"
            )));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct DeterministicRun {
    pub regions: Vec<Region>,
    pub trajectory: Trajectory,
    pub alg_cost: usize,
    /// `⌈updates / (ρ − 1)⌉`: one disk covers every `ρ − 1` consecutive updates.
    pub opt_bound: usize,
    /// Cost of the offline optimum on the final trajectory.
    pub opt_cost: usize,
}

impl DeterministicRun {
    pub fn ratio(&self) -> f64 {
        self.alg_cost as f64 / self.opt_cost as f64
    }
}

/// Builds a tracker for the flower's disks and repeatedly extends the
/// trajectory to the cell outside the tracker's current disk and back to
/// the center.
pub fn run_deterministic_adversary(
    make_tracker: &TrackerFactory<'_>,
    rho: usize,
    updates: usize,
) -> Result<DeterministicRun, AdversaryError> {
    let f = flower(rho)?;
    let mut tracker = make_tracker(&f.regions)?;
    let mut builder = EventBuilder::new(&f.regions, 0.0, f.center)?;
    tracker.init(&StreamStart {
        time: 0.0,
        point: f.center,
        inside: builder.initial_inside(),
    })?;
    let mut samples = vec![(0.0, f.center)];
    for _ in 0..updates {
        let current = *tracker
            .current_regions()
            .first()
            .ok_or_else(|| AdversaryError::SelfCheck("tracker holds no region".into()))?;
        let i = f
            .regions
            .iter()
            .position(|r| r.id == current)
            .expect("tracker regions come from the flower");
        for p in [f.cells[i], f.center] {
            let t = samples.len() as f64;
            let events = builder.push(t, p)?;
            samples.push((t, p));
            for batch in events.chunk_by(|a, b| a.time == b.time) {
                tracker.on_events(batch[0].time, batch)?;
            }
        }
    }
    let trajectory = Trajectory::new(samples)?;
    let solution = tracker.finish();
    for seq in &solution.sequences {
        validate(&f.regions, &trajectory, seq, true)?;
    }
    let opt_cost = greedy_offline(&coverage_timeline(&f.regions, &trajectory)?)?.cost();
    Ok(DeterministicRun {
        alg_cost: solution.total_cost(),
        opt_bound: updates.div_ceil(rho - 1).max(1),
        opt_cost,
        regions: f.regions,
        trajectory,
    })
}
