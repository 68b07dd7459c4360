use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{FEventLog, OnlineError, OnlineTracker, Presence, StepRecord, StreamStart};
use crate::events::Event;
use crate::geometry::{Region, RegionId};
use crate::offline::{CoverageSolution, TrackingSequence};

/// Randomized tracker for `c` disjoint sequences. Each exited assignment is
/// replaced by a uniform unassigned candidate. When fewer than `c`
/// candidates remain, the regions assigned just before are marked fixed and
/// a new step starts from every region containing the trajectory.
#[derive(Debug, Clone)]
pub struct TrilaterationTracker {
    c: usize,
    rng: ChaCha8Rng,
    presence: Presence,
    candidates: BTreeSet<RegionId>,
    assigned: Vec<Option<RegionId>>,
    fixed: BTreeSet<RegionId>,
    seqs: Vec<TrackingSequence>,
    steps: Vec<StepRecord>,
    log: FEventLog,
}

impl TrilaterationTracker {
    pub fn new(regions: &[Region], c: usize, seed: u64) -> Result<Self, OnlineError> {
        if c == 0 {
            return Err(OnlineError::Unsupported {
                tracker: "trilat",
                reason: "coverage must be at least 1".into(),
            });
        }
        Ok(TrilaterationTracker {
            c,
            rng: ChaCha8Rng::seed_from_u64(seed),
            presence: Presence::new(regions),
            candidates: BTreeSet::new(),
            assigned: vec![None; c],
            fixed: BTreeSet::new(),
            seqs: vec![TrackingSequence::default(); c],
            steps: Vec::new(),
            log: FEventLog::default(),
        })
    }

    pub fn coverage(&self) -> usize {
        self.c
    }

    fn new_step(&mut self, time: f64) -> Result<(), OnlineError> {
        let found = self.presence.inside.len();
        if found < self.c {
            return Err(OnlineError::CoverageLost {
                time,
                required: self.c,
                found,
            });
        }
        self.candidates = self.presence.inside.clone();
        self.steps.push(StepRecord {
            time,
            candidates: found,
            picks: 0,
        });
        self.log.per_step.push(0);
        Ok(())
    }

    fn fill(&mut self, time: f64) -> Result<(), OnlineError> {
        for track in 0..self.c {
            if self.assigned[track].is_some() {
                continue;
            }
            let free: Vec<RegionId> = self
                .candidates
                .iter()
                .copied()
                .filter(|id| !self.assigned.contains(&Some(*id)))
                .collect();
            if free.is_empty() {
                return Err(OnlineError::CoverageLost {
                    time,
                    required: self.c,
                    found: self.candidates.len(),
                });
            }
            let id = free[self.rng.gen_range(0..free.len())];
            self.assigned[track] = Some(id);
            self.steps.last_mut().expect("step started").picks += 1;
            if self.seqs[track].last_region() != Some(id) {
                self.seqs[track].pairs.push((time, id));
            }
        }
        Ok(())
    }
}

impl OnlineTracker for TrilaterationTracker {
    fn name(&self) -> &'static str {
        "trilat"
    }

    fn init(&mut self, start: &StreamStart) -> Result<(), OnlineError> {
        self.presence.start(start)?;
        self.assigned = vec![None; self.c];
        self.seqs = vec![TrackingSequence::default(); self.c];
        self.fixed.clear();
        self.steps.clear();
        self.log = FEventLog::default();
        self.new_step(start.time)?;
        self.log.per_step[0] = 1;
        self.fill(start.time)
    }

    fn on_events(&mut self, time: f64, batch: &[Event]) -> Result<(), OnlineError> {
        let exited = self.presence.apply(time, batch)?;
        if exited.is_empty() {
            return Ok(());
        }
        self.candidates.retain(|id| !exited.contains(id));
        if self.candidates.len() < self.c {
            self.fixed = self.assigned.iter().flatten().copied().collect();
            self.new_step(time)?;
        }
        for &id in exited.intersection(&self.fixed) {
            self.log.events.push((time, id));
            *self.log.per_step.last_mut().expect("step started") += 1;
        }
        self.fixed.retain(|id| !exited.contains(id));
        for slot in &mut self.assigned {
            if slot.is_some_and(|id| exited.contains(&id)) {
                *slot = None;
            }
        }
        self.fill(time)
    }

    fn current_regions(&self) -> Vec<RegionId> {
        self.assigned.iter().flatten().copied().collect()
    }

    fn finish(&self) -> CoverageSolution {
        CoverageSolution {
            sequences: self.seqs.clone(),
        }
    }

    fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    fn f_events(&self) -> Option<&FEventLog> {
        Some(&self.log)
    }
}
