use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{OnlineError, OnlineTracker, Presence, StepRecord, StreamStart};
use crate::events::Event;
use crate::geometry::{Region, RegionId, RegionShape};
use crate::offline::{CoverageSolution, TrackingSequence};

/// Chooses the next region from a nonempty candidate set.
pub trait Picker: Send {
    fn pick(&mut self, candidates: &BTreeSet<RegionId>) -> RegionId;
}

/// Uniformly random candidate.
#[derive(Debug, Clone)]
pub struct Uniform(pub ChaCha8Rng);

impl Picker for Uniform {
    fn pick(&mut self, candidates: &BTreeSet<RegionId>) -> RegionId {
        let i = self.0.gen_range(0..candidates.len());
        *candidates.iter().nth(i).expect("index below length")
    }
}

/// Lowest region id.
#[derive(Debug, Clone, Copy, Default)]
pub struct FirstId;

impl Picker for FirstId {
    fn pick(&mut self, candidates: &BTreeSet<RegionId>) -> RegionId {
        *candidates.first().expect("nonempty candidates")
    }
}

/// Interval whose worse rank among left endpoints (ascending) and right
/// endpoints (descending) is smallest; ties by id.
#[derive(Debug, Clone)]
pub struct MinMaxRank {
    bounds: BTreeMap<RegionId, (f64, f64)>,
}

impl MinMaxRank {
    pub fn new(regions: &[Region]) -> Result<Self, OnlineError> {
        let bounds = regions
            .iter()
            .map(|r| match r.shape {
                RegionShape::Interval { lo, hi } => Ok((r.id, (lo, hi))),
                _ => Err(OnlineError::Unsupported {
                    tracker: "det-1d",
                    reason: format!("region {} is not an interval", r.id),
                }),
            })
            .collect::<Result<_, _>>()?;
        Ok(MinMaxRank { bounds })
    }

    /// `(left rank, right rank)` of every candidate, both 1-based.
    pub fn ranks(&self, candidates: &BTreeSet<RegionId>) -> BTreeMap<RegionId, (usize, usize)> {
        let mut left: Vec<RegionId> = candidates.iter().copied().collect();
        let mut right = left.clone();
        left.sort_by(|a, b| self.bounds[a].0.total_cmp(&self.bounds[b].0).then(a.cmp(b)));
        right.sort_by(|a, b| self.bounds[b].1.total_cmp(&self.bounds[a].1).then(a.cmp(b)));
        let mut out: BTreeMap<RegionId, (usize, usize)> = BTreeMap::new();
        for (i, id) in left.iter().enumerate() {
            out.entry(*id).or_default().0 = i + 1;
        }
        for (i, id) in right.iter().enumerate() {
            out.entry(*id).or_default().1 = i + 1;
        }
        out
    }
}

impl Picker for MinMaxRank {
    fn pick(&mut self, candidates: &BTreeSet<RegionId>) -> RegionId {
        self.ranks(candidates)
            .into_iter()
            .min_by_key(|&(id, (l, r))| (l.max(r), id))
            .map(|(id, _)| id)
            .expect("nonempty candidates")
    }
}

/// Step-based tracker. The candidate set holds the regions of the current
/// step that have not been exited; when it empties a new step begins with
/// every region containing the trajectory, and whenever the assigned
/// region is exited the picker chooses a replacement among the candidates.
/// Enter events only update the containment state.
#[derive(Debug, Clone)]
pub struct StepTracker<P> {
    name: &'static str,
    picker: P,
    presence: Presence,
    candidates: BTreeSet<RegionId>,
    seq: TrackingSequence,
    steps: Vec<StepRecord>,
}

pub type RandomTracker = StepTracker<Uniform>;
pub type DetFirstTracker = StepTracker<FirstId>;
pub type OneDimTracker = StepTracker<MinMaxRank>;

impl RandomTracker {
    pub fn random(regions: &[Region], seed: u64) -> Self {
        StepTracker::with_picker("random", regions, Uniform(ChaCha8Rng::seed_from_u64(seed)))
    }
}

impl DetFirstTracker {
    pub fn det_first(regions: &[Region]) -> Self {
        StepTracker::with_picker("det-first", regions, FirstId)
    }
}

impl OneDimTracker {
    pub fn one_dim(regions: &[Region]) -> Result<Self, OnlineError> {
        Ok(StepTracker::with_picker(
            "det-1d",
            regions,
            MinMaxRank::new(regions)?,
        ))
    }
}

impl<P: Picker> StepTracker<P> {
    pub fn with_picker(name: &'static str, regions: &[Region], picker: P) -> Self {
        StepTracker {
            name,
            picker,
            presence: Presence::new(regions),
            candidates: BTreeSet::new(),
            seq: TrackingSequence::default(),
            steps: Vec::new(),
        }
    }

    pub fn candidates(&self) -> &BTreeSet<RegionId> {
        &self.candidates
    }

    fn new_step(&mut self, time: f64) -> Result<(), OnlineError> {
        if self.presence.inside.is_empty() {
            return Err(OnlineError::CoverageLost {
                time,
                required: 1,
                found: 0,
            });
        }
        self.candidates = self.presence.inside.clone();
        self.steps.push(StepRecord {
            time,
            candidates: self.candidates.len(),
            picks: 0,
        });
        Ok(())
    }

    fn pick(&mut self, time: f64) {
        let id = self.picker.pick(&self.candidates);
        self.steps.last_mut().expect("step started").picks += 1;
        if self.seq.last_region() != Some(id) {
            self.seq.pairs.push((time, id));
        }
    }
}

impl<P: Picker> OnlineTracker for StepTracker<P> {
    fn name(&self) -> &'static str {
        self.name
    }

    fn init(&mut self, start: &StreamStart) -> Result<(), OnlineError> {
        self.presence.start(start)?;
        self.seq = TrackingSequence::default();
        self.steps.clear();
        self.new_step(start.time)?;
        self.pick(start.time);
        Ok(())
    }

    fn on_events(&mut self, time: f64, batch: &[Event]) -> Result<(), OnlineError> {
        let exited = self.presence.apply(time, batch)?;
        self.candidates.retain(|id| !exited.contains(id));
        if self.candidates.is_empty() {
            self.new_step(time)?;
        }
        let current_lost = self
            .seq
            .last_region()
            .is_some_and(|id| exited.contains(&id));
        if current_lost {
            self.pick(time);
        }
        Ok(())
    }

    fn current_regions(&self) -> Vec<RegionId> {
        self.seq.last_region().into_iter().collect()
    }

    fn finish(&self) -> CoverageSolution {
        CoverageSolution::single(self.seq.clone())
    }

    fn steps(&self) -> &[StepRecord] {
        &self.steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[u32]) -> BTreeSet<RegionId> {
        v.iter().map(|&i| RegionId(i)).collect()
    }

    #[test]
    fn min_max_rank_prefers_balanced_interval() {
        // Eight intervals around 0; interval 5 is third from the left and
        // reaches furthest to the right.
        let spec = [
            (-8.0, 1.0),
            (-7.0, 2.0),
            (-1.0, 0.5),
            (-0.5, 3.0),
            (-0.2, 0.3),
            (-6.0, 7.0),
            (-0.1, 0.2),
            (-0.05, 0.1),
        ];
        let regions: Vec<Region> = spec
            .iter()
            .enumerate()
            .map(|(i, &(lo, hi))| Region::interval(i as u32, lo, hi).unwrap())
            .collect();
        let mut p = MinMaxRank::new(&regions).unwrap();
        let all = ids(&[0, 1, 2, 3, 4, 5, 6, 7]);
        let ranks = p.ranks(&all);
        assert_eq!(ranks[&RegionId(5)], (3, 1));
        let chosen = p.pick(&all);
        let (l, r) = ranks[&chosen];
        assert!(l <= 4 && r <= 4);
        assert_eq!(p.pick(&ids(&[6])), RegionId(6));
    }

    #[test]
    fn min_max_rank_rejects_disks() {
        let regions = vec![Region::disk(0, crate::geometry::Point::two(0.0, 0.0), 1.0).unwrap()];
        assert!(MinMaxRank::new(&regions).is_err());
    }

    #[test]
    fn first_id_and_uniform() {
        assert_eq!(FirstId.pick(&ids(&[4, 2, 9])), RegionId(2));
        let mut u = Uniform(ChaCha8Rng::seed_from_u64(1));
        let set = ids(&[4, 2, 9]);
        for _ in 0..20 {
            assert!(set.contains(&u.pick(&set)));
        }
    }
}
