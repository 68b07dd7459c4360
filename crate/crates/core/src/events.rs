//! Trajectories and their translation into enter/exit events, per-region
//! containment intervals in time, and the canonical step sequence whose
//! length lower-bounds every tracking sequence.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    check_region_set, segment_profile, CrossingKind, GeometryError, Point, Region, RegionId,
    Segment,
};

pub type EventKind = CrossingKind;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("trajectory has no samples")]
    EmptyTrajectory,
    #[error("trajectory timestamps must strictly increase (sample {index} at t={time})")]
    NonIncreasingTime { index: usize, time: f64 },
    #[error("trajectory sample {index} is malformed: {reason}")]
    MalformedSample { index: usize, reason: String },
    #[error("trajectory left {required}-fold coverage at t={time} ({found} regions)")]
    CoverageGap {
        time: f64,
        required: usize,
        found: usize,
    },
}

/// A timestamped sample of a trajectory.
pub type Sample = (f64, Point);

/// Continuous piecewise-linear path: linear interpolation between samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTrajectory", into = "RawTrajectory")]
pub struct Trajectory {
    samples: Vec<Sample>,
}

#[derive(Serialize, Deserialize)]
struct RawTrajectory {
    samples: Vec<Vec<f64>>,
}

impl TryFrom<RawTrajectory> for Trajectory {
    type Error = EventError;

    fn try_from(raw: RawTrajectory) -> Result<Self, Self::Error> {
        Trajectory::from_rows(raw.samples)
    }
}

impl From<Trajectory> for RawTrajectory {
    fn from(t: Trajectory) -> Self {
        RawTrajectory {
            samples: t.to_rows(),
        }
    }
}

impl Trajectory {
    pub fn new(samples: Vec<Sample>) -> Result<Self, EventError> {
        let (t0, p0) = samples.first().ok_or(EventError::EmptyTrajectory)?;
        let dim = p0.dim();
        if !t0.is_finite() {
            return Err(EventError::MalformedSample {
                index: 0,
                reason: "non-finite time".into(),
            });
        }
        for (index, (t, p)) in samples.iter().enumerate() {
            if !t.is_finite() || !p.is_finite() {
                return Err(EventError::MalformedSample {
                    index,
                    reason: "non-finite value".into(),
                });
            }
            if p.dim() != dim {
                return Err(GeometryError::DimensionMismatch {
                    expected: dim,
                    found: p.dim(),
                }
                .into());
            }
            if index > 0 && *t <= samples[index - 1].0 {
                return Err(EventError::NonIncreasingTime { index, time: *t });
            }
        }
        Ok(Trajectory { samples })
    }

    /// Parses rows of the form `[t, x]` or `[t, x, y]`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, EventError> {
        let samples = rows
            .into_iter()
            .enumerate()
            .map(|(index, row)| match row.split_first() {
                Some((t, coords)) if !coords.is_empty() => Point::from_slice(coords)
                    .map(|p| (*t, p))
                    .map_err(|e| EventError::MalformedSample {
                        index,
                        reason: e.to_string(),
                    }),
                _ => Err(EventError::MalformedSample {
                    index,
                    reason: "expected [t, x] or [t, x, y]".into(),
                }),
            })
            .collect::<Result<Vec<_>, _>>()?;
        Trajectory::new(samples)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.samples
            .iter()
            .map(|(t, p)| {
                std::iter::once(*t)
                    .chain(p.coords().iter().copied())
                    .collect()
            })
            .collect()
    }

    /// Evenly timed path through `points`, one time unit per piece.
    pub fn unit_timed(
        start: f64,
        points: impl IntoIterator<Item = Point>,
    ) -> Result<Self, EventError> {
        Trajectory::new(
            points
                .into_iter()
                .enumerate()
                .map(|(i, p)| (start + i as f64, p))
                .collect(),
        )
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn dim(&self) -> usize {
        self.samples[0].1.dim()
    }

    pub fn start_time(&self) -> f64 {
        self.samples[0].0
    }

    pub fn end_time(&self) -> f64 {
        self.samples[self.samples.len() - 1].0
    }

    pub fn start_point(&self) -> Point {
        self.samples[0].1
    }

    pub fn segments(&self) -> impl Iterator<Item = Segment> + '_ {
        self.samples
            .windows(2)
            .map(|w| Segment::new(w[0].0, w[0].1, w[1].0, w[1].1))
    }

    /// Position at time `t`, clamped to the horizon. Exact at sample times.
    pub fn position_at(&self, t: f64) -> Point {
        let i = self.samples.partition_point(|(ts, _)| *ts <= t);
        if i == 0 {
            return self.samples[0].1;
        }
        let (ta, pa) = self.samples[i - 1];
        if ta == t || i == self.samples.len() {
            return pa;
        }
        Segment::new(ta, pa, self.samples[i].0, self.samples[i].1).position(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub region_id: RegionId,
    pub kind: EventKind,
}

impl Event {
    /// Total order: time, then exits before enters, then region id.
    pub fn order(&self, other: &Event) -> std::cmp::Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.cmp(&other.kind))
            .then(self.region_id.cmp(&other.region_id))
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.time, self.region_id, self.kind)
    }
}

/// Start state plus the ordered event list of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    pub start_time: f64,
    pub end_time: f64,
    pub start_point: Point,
    /// Regions containing the trajectory on some interval `[t_start, t_start + δ]`.
    pub initial_inside: BTreeSet<RegionId>,
    pub events: Vec<Event>,
}

impl EventStream {
    /// Events grouped by identical timestamp, in order.
    pub fn batches(&self) -> impl Iterator<Item = &[Event]> {
        self.events.chunk_by(|a, b| a.time == b.time)
    }
}

/// Incremental event extraction for a trajectory revealed piece by piece.
///
/// A state change exactly at a sample time is only known once the following
/// piece arrives, so each `push` reports the events of the new piece together
/// with any change at the joint it starts from.
#[derive(Debug, Clone)]
pub struct EventBuilder<'a> {
    regions: &'a [Region],
    last: Sample,
    initial: Vec<bool>,
    prev_end: Vec<Option<bool>>,
}

impl<'a> EventBuilder<'a> {
    pub fn new(regions: &'a [Region], t0: f64, p0: Point) -> Result<Self, EventError> {
        let dim = check_region_set(regions)?;
        if p0.dim() != dim {
            return Err(GeometryError::DimensionMismatch {
                expected: dim,
                found: p0.dim(),
            }
            .into());
        }
        let initial = regions
            .iter()
            .map(|r| r.contains(&p0))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(EventBuilder {
            regions,
            last: (t0, p0),
            prev_end: vec![None; regions.len()],
            initial,
        })
    }

    /// Regions whose closed shape contains the start point.
    pub fn initial_inside(&self) -> BTreeSet<RegionId> {
        self.regions
            .iter()
            .zip(&self.initial)
            .filter(|(_, &inside)| inside)
            .map(|(r, _)| r.id)
            .collect()
    }

    pub fn last_sample(&self) -> Sample {
        self.last
    }

    pub fn push(&mut self, t: f64, p: Point) -> Result<Vec<Event>, EventError> {
        if !(t > self.last.0) {
            return Err(EventError::NonIncreasingTime { index: 0, time: t });
        }
        let seg = Segment::new(self.last.0, self.last.1, t, p);
        let mut out = Vec::new();
        for (i, region) in self.regions.iter().enumerate() {
            let profile = segment_profile(region, &seg)?;
            let before = self.prev_end[i].unwrap_or(self.initial[i]);
            if before != profile.starts_inside {
                let kind = if profile.starts_inside {
                    CrossingKind::Enter
                } else {
                    CrossingKind::Exit
                };
                out.push(Event {
                    time: seg.t0,
                    region_id: region.id,
                    kind,
                });
            }
            out.extend(profile.crossings.iter().map(|c| Event {
                time: c.time,
                region_id: region.id,
                kind: c.kind,
            }));
            self.prev_end[i] = Some(profile.ends_inside);
        }
        out.sort_by(Event::order);
        self.last = (t, p);
        Ok(out)
    }
}

/// Full event stream of a known trajectory. Changes exactly at the start
/// time are folded into the initial containment set.
pub fn event_stream(
    regions: &[Region],
    trajectory: &Trajectory,
) -> Result<EventStream, EventError> {
    let (t0, p0) = trajectory.samples()[0];
    let mut builder = EventBuilder::new(regions, t0, p0)?;
    let mut initial_inside = builder.initial_inside();
    let mut events = Vec::new();
    for &(t, p) in &trajectory.samples()[1..] {
        events.extend(builder.push(t, p)?);
    }
    let at_start = events.partition_point(|e| e.time <= t0);
    for e in events.drain(..at_start) {
        match e.kind {
            CrossingKind::Exit => initial_inside.remove(&e.region_id),
            CrossingKind::Enter => initial_inside.insert(e.region_id),
        };
    }
    Ok(EventStream {
        start_time: t0,
        end_time: trajectory.end_time(),
        start_point: p0,
        initial_inside,
        events,
    })
}

pub fn event_sequence(
    regions: &[Region],
    trajectory: &Trajectory,
) -> Result<Vec<Event>, EventError> {
    Ok(event_stream(regions, trajectory)?.events)
}

/// Per-region maximal closed time intervals of containment over a finite
/// horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageTimeline {
    pub start: f64,
    pub end: f64,
    intervals: BTreeMap<RegionId, Vec<(f64, f64)>>,
}

impl CoverageTimeline {
    pub fn from_stream(stream: &EventStream, ids: impl IntoIterator<Item = RegionId>) -> Self {
        let mut intervals: BTreeMap<RegionId, Vec<(f64, f64)>> =
            ids.into_iter().map(|id| (id, Vec::new())).collect();
        let mut open: BTreeMap<RegionId, f64> = stream
            .initial_inside
            .iter()
            .map(|&id| (id, stream.start_time))
            .collect();
        for e in &stream.events {
            match e.kind {
                CrossingKind::Enter => {
                    open.entry(e.region_id).or_insert(e.time);
                }
                CrossingKind::Exit => {
                    if let Some(a) = open.remove(&e.region_id) {
                        push_merged(intervals.entry(e.region_id).or_default(), (a, e.time));
                    }
                }
            }
        }
        for (id, a) in open {
            push_merged(intervals.entry(id).or_default(), (a, stream.end_time));
        }
        CoverageTimeline {
            start: stream.start_time,
            end: stream.end_time,
            intervals,
        }
    }

    /// Builds a timeline directly from interval lists.
    pub fn from_intervals(
        start: f64,
        end: f64,
        intervals: BTreeMap<RegionId, Vec<(f64, f64)>>,
    ) -> Self {
        let intervals = intervals
            .into_iter()
            .map(|(id, mut list)| {
                list.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut merged = Vec::with_capacity(list.len());
                for iv in list {
                    push_merged(&mut merged, (iv.0.max(start), iv.1.min(end)));
                }
                (id, merged)
            })
            .collect();
        CoverageTimeline {
            start,
            end,
            intervals,
        }
    }

    pub fn regions(&self) -> impl Iterator<Item = RegionId> + '_ {
        self.intervals.keys().copied()
    }

    pub fn intervals(&self, id: RegionId) -> &[(f64, f64)] {
        self.intervals.get(&id).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn all_intervals(&self) -> impl Iterator<Item = (RegionId, f64, f64)> + '_ {
        self.intervals
            .iter()
            .flat_map(|(&id, list)| list.iter().map(move |&(a, b)| (id, a, b)))
    }

    pub fn is_instant(&self) -> bool {
        self.end <= self.start
    }

    /// Containment interval of `id` that holds on `[t, t + δ]` for some
    /// δ > 0, or that contains `t` when `t` is the horizon end.
    pub fn interval_at(&self, id: RegionId, t: f64) -> Option<(f64, f64)> {
        let list = self.intervals(id);
        let i = list.partition_point(|&(a, _)| a <= t);
        let &(a, b) = list[..i].last()?;
        let reaches = if t >= self.end { b >= t } else { b > t };
        (a <= t && reaches).then_some((a, b))
    }

    /// Regions containing the trajectory on `[t, t + δ]`.
    pub fn covering(&self, t: f64) -> BTreeSet<RegionId> {
        self.regions()
            .filter(|&id| self.interval_at(id, t).is_some())
            .collect()
    }

    /// Consecutive distinct interval endpoints across the horizon. Every
    /// containment interval either covers a piece entirely or not at all.
    pub fn elementary_pieces(&self) -> Vec<(f64, f64)> {
        let mut cuts: Vec<f64> = vec![self.start, self.end];
        for (_, a, b) in self.all_intervals() {
            cuts.push(a);
            cuts.push(b);
        }
        cuts.retain(|&t| t >= self.start && t <= self.end);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2).map(|w| (w[0], w[1])).collect()
    }

    /// Regions whose containment covers the closed piece `[a, b]`.
    pub fn covering_piece(&self, a: f64, b: f64) -> BTreeSet<RegionId> {
        self.intervals
            .iter()
            .filter(|(_, list)| list.iter().any(|&(x, y)| x <= a && y >= b))
            .map(|(&id, _)| id)
            .collect()
    }

    /// First time at which fewer than `c` regions contain the trajectory,
    /// with the count found there.
    pub fn first_gap(&self, c: usize) -> Option<(f64, usize)> {
        if self.is_instant() {
            let n = self.covering_piece(self.start, self.start).len();
            return (n < c).then_some((self.start, n));
        }
        self.elementary_pieces().into_iter().find_map(|(a, b)| {
            let n = self.covering_piece(a, b).len();
            (n < c).then_some((a, n))
        })
    }
}

fn push_merged(list: &mut Vec<(f64, f64)>, iv: (f64, f64)) {
    match list.last_mut() {
        Some(last) if iv.0 <= last.1 => last.1 = last.1.max(iv.1),
        _ => list.push(iv),
    }
}

pub fn coverage_timeline(
    regions: &[Region],
    trajectory: &Trajectory,
) -> Result<CoverageTimeline, EventError> {
    let stream = event_stream(regions, trajectory)?;
    Ok(CoverageTimeline::from_stream(
        &stream,
        regions.iter().map(|r| r.id),
    ))
}

/// True iff at least `c` regions contain the trajectory at every time of the horizon.
pub fn check_coverage(timeline: &CoverageTimeline, c: usize) -> bool {
    timeline.first_gap(c).is_none()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub time: f64,
    pub point: Point,
    pub regions: BTreeSet<RegionId>,
}

/// Times at which the trajectory has left every region that contained the
/// previous step point.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSequence {
    pub steps: Vec<Step>,
}

impl StepSequence {
    /// Number of steps; every tracking sequence has at least this many pairs.
    pub fn k(&self) -> usize {
        self.steps.len()
    }

    pub fn times(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.time).collect()
    }
}

/// Step times and step region sets computed from a timeline.
pub fn timeline_steps(
    timeline: &CoverageTimeline,
) -> Result<Vec<(f64, BTreeSet<RegionId>)>, EventError> {
    let mut steps = Vec::new();
    let mut tau = timeline.start;
    loop {
        let regions = timeline.covering(tau);
        if regions.is_empty() {
            return Err(EventError::CoverageGap {
                time: tau,
                required: 1,
                found: 0,
            });
        }
        let mut next = f64::NEG_INFINITY;
        let mut all_exit = true;
        for &id in &regions {
            let (_, b) = timeline
                .interval_at(id, tau)
                .expect("covering region has an interval");
            if b >= timeline.end {
                all_exit = false;
            }
            next = next.max(b);
        }
        steps.push((tau, regions));
        if !all_exit {
            return Ok(steps);
        }
        tau = next;
    }
}

pub fn step_sequence(
    regions: &[Region],
    trajectory: &Trajectory,
) -> Result<StepSequence, EventError> {
    let timeline = coverage_timeline(regions, trajectory)?;
    if let Some((time, found)) = timeline.first_gap(1) {
        return Err(EventError::CoverageGap {
            time,
            required: 1,
            found,
        });
    }
    let steps = timeline_steps(&timeline)?
        .into_iter()
        .map(|(time, regions)| Step {
            time,
            point: trajectory.position_at(time),
            regions,
        })
        .collect();
    Ok(StepSequence { steps })
}
