//! Online trackers driven by the event stream: the step-based trackers with
//! uniform, lowest-id and one-dimensional rank choices, and the randomized
//! c-coverage tracker with F-event accounting.

mod step;
mod trilateration;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{Event, EventStream};
use crate::geometry::{Point, Region, RegionId};
use crate::offline::CoverageSolution;

pub use step::{
    DetFirstTracker, FirstId, MinMaxRank, OneDimTracker, Picker, RandomTracker, StepTracker,
    Uniform,
};
pub use trilateration::TrilaterationTracker;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OnlineError {
    #[error("event for unknown region {region} at t={time}")]
    UnknownRegion { time: f64, region: RegionId },
    #[error("event at t={time} arrives after t={previous}")]
    OutOfOrder { time: f64, previous: f64 },
    #[error("coverage {required} lost at t={time}: {found} regions contain the trajectory")]
    CoverageLost {
        time: f64,
        required: usize,
        found: usize,
    },
    #[error("tracker used before init")]
    NotInitialized,
    #[error("unsupported scenario for {tracker}: {reason}")]
    Unsupported {
        tracker: &'static str,
        reason: String,
    },
}

/// State of the trajectory when tracking begins.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamStart {
    pub time: f64,
    pub point: Point,
    pub inside: BTreeSet<RegionId>,
}

impl From<&EventStream> for StreamStart {
    fn from(s: &EventStream) -> Self {
        StreamStart {
            time: s.start_time,
            point: s.start_point,
            inside: s.initial_inside.clone(),
        }
    }
}

/// One step of a tracker: when it began, how many candidates it started
/// with, and how many regions were picked during it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub time: f64,
    pub candidates: usize,
    pub picks: usize,
}

/// Exits of fixed regions, grouped by step. The start of tracking counts as
/// the single F-event of the first step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FEventLog {
    pub events: Vec<(f64, RegionId)>,
    pub per_step: Vec<usize>,
}

impl FEventLog {
    pub fn m(&self) -> usize {
        self.per_step.iter().sum()
    }
}

/// The optimum is within a constant factor of the F-event count.
pub fn f_event_bound_check(log: &FEventLog, opt_cost: usize, c: usize) -> bool {
    let (m, opt, c) = (log.m() as f64, opt_cost as f64, c as f64);
    opt >= m / 2.0 - c && opt <= m + c
}

/// An online tracker. Events must arrive in stream order; events sharing
/// a timestamp should be delivered together through `on_events`.
/// Pairs already emitted are never changed.
pub trait OnlineTracker: Send {
    fn name(&self) -> &'static str;

    fn init(&mut self, start: &StreamStart) -> Result<(), OnlineError>;

    fn on_events(&mut self, time: f64, batch: &[Event]) -> Result<(), OnlineError>;

    fn on_event(&mut self, event: &Event) -> Result<(), OnlineError> {
        self.on_events(event.time, std::slice::from_ref(event))
    }

    /// Regions currently assigned, one per tracked sequence.
    fn current_regions(&self) -> Vec<RegionId>;

    /// The solution built so far.
    fn finish(&self) -> CoverageSolution;

    fn steps(&self) -> &[StepRecord];

    fn f_events(&self) -> Option<&FEventLog> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackerKind {
    Random,
    DetFirst,
    #[serde(rename = "det-1d")]
    DetOneDim,
    Trilat,
}

impl TrackerKind {
    pub const ALL: [TrackerKind; 4] = [
        TrackerKind::Random,
        TrackerKind::DetFirst,
        TrackerKind::DetOneDim,
        TrackerKind::Trilat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TrackerKind::Random => "random",
            TrackerKind::DetFirst => "det-first",
            TrackerKind::DetOneDim => "det-1d",
            TrackerKind::Trilat => "trilat",
        }
    }

    pub fn is_deterministic(self) -> bool {
        matches!(self, TrackerKind::DetFirst | TrackerKind::DetOneDim)
    }
}

impl fmt::Display for TrackerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TrackerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TrackerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                format!("unknown tracker '{s}' (expected random, det-first, det-1d or trilat)")
            })
    }
}

pub fn build_tracker(
    kind: TrackerKind,
    regions: &[Region],
    c: usize,
    seed: u64,
) -> Result<Box<dyn OnlineTracker>, OnlineError> {
    if c != 1 && kind != TrackerKind::Trilat {
        return Err(OnlineError::Unsupported {
            tracker: kind.as_str(),
            reason: format!("coverage {c} needs trilat"),
        });
    }
    Ok(match kind {
        TrackerKind::Random => Box::new(RandomTracker::random(regions, seed)),
        TrackerKind::DetFirst => Box::new(DetFirstTracker::det_first(regions)),
        TrackerKind::DetOneDim => Box::new(OneDimTracker::one_dim(regions)?),
        TrackerKind::Trilat => Box::new(TrilaterationTracker::new(regions, c, seed)?),
    })
}

/// Runs a tracker over a complete stream, delivering simultaneous events
/// as one batch.
pub fn drive(
    tracker: &mut dyn OnlineTracker,
    stream: &EventStream,
) -> Result<CoverageSolution, OnlineError> {
    tracker.init(&StreamStart::from(stream))?;
    for batch in stream.batches() {
        tracker.on_events(batch[0].time, batch)?;
    }
    Ok(tracker.finish())
}

/// Shared bookkeeping: the set of regions containing the trajectory, the
/// known ids and the clock.
#[derive(Debug, Clone, Default)]
pub(crate) struct Presence {
    known: BTreeSet<RegionId>,
    pub inside: BTreeSet<RegionId>,
    last_time: Option<f64>,
}

impl Presence {
    pub fn new(regions: &[Region]) -> Self {
        Presence {
            known: regions.iter().map(|r| r.id).collect(),
            ..Default::default()
        }
    }

    pub fn start(&mut self, start: &StreamStart) -> Result<(), OnlineError> {
        if let Some(&region) = start.inside.iter().find(|id| !self.known.contains(id)) {
            return Err(OnlineError::UnknownRegion {
                time: start.time,
                region,
            });
        }
        self.inside = start.inside.clone();
        self.last_time = Some(start.time);
        Ok(())
    }

    /// Applies a batch and returns the regions it exits.
    pub fn apply(&mut self, time: f64, batch: &[Event]) -> Result<BTreeSet<RegionId>, OnlineError> {
        let previous = self.last_time.ok_or(OnlineError::NotInitialized)?;
        if time < previous {
            return Err(OnlineError::OutOfOrder { time, previous });
        }
        let mut exited = BTreeSet::new();
        for e in batch {
            if !self.known.contains(&e.region_id) {
                return Err(OnlineError::UnknownRegion {
                    time,
                    region: e.region_id,
                });
            }
            if e.time != time {
                return Err(OnlineError::OutOfOrder {
                    time: e.time,
                    previous: time,
                });
            }
            match e.kind {
                crate::events::EventKind::Exit => {
                    self.inside.remove(&e.region_id);
                    exited.insert(e.region_id);
                }
                crate::events::EventKind::Enter => {
                    self.inside.insert(e.region_id);
                    exited.remove(&e.region_id);
                }
            }
        }
        self.last_time = Some(time);
        Ok(exited)
    }
}
