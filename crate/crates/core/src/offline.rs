//! Tracking sequences, their validation, the greedy offline solvers for
//! single and c-fold coverage, and exhaustive optimality oracles.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{coverage_timeline, CoverageTimeline, EventError, Trajectory};
use crate::geometry::{Region, RegionId, EPS};

/// Ordered `(time, region)` pairs. Pair `i` assigns its region from its
/// time until the next pair's time, the last one until the horizon end.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrackingSequence {
    pub pairs: Vec<(f64, RegionId)>,
}

impl TrackingSequence {
    pub fn cost(&self) -> usize {
        self.pairs.len()
    }

    pub fn last_region(&self) -> Option<RegionId> {
        self.pairs.last().map(|p| p.1)
    }

    /// Closed time spans `(start, end, region)` of each pair.
    pub fn spans(&self, horizon_end: f64) -> Vec<(f64, f64, RegionId)> {
        self.pairs
            .iter()
            .enumerate()
            .map(|(i, &(t, id))| (t, self.pairs.get(i + 1).map_or(horizon_end, |p| p.0), id))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CoverageSolution {
    pub sequences: Vec<TrackingSequence>,
}

impl CoverageSolution {
    pub fn single(seq: TrackingSequence) -> Self {
        CoverageSolution {
            sequences: vec![seq],
        }
    }

    pub fn total_cost(&self) -> usize {
        self.sequences.iter().map(TrackingSequence::cost).sum()
    }
}

/// First violated constraint of a proposed solution.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Violation {
    #[error("invalid scenario: {0}")]
    Input(#[from] EventError),
    #[error("tracking sequence {sequence} is empty")]
    Empty { sequence: usize },
    #[error("sequence {sequence} starts at t={time}, expected horizon start {expected}")]
    BadStart {
        sequence: usize,
        time: f64,
        expected: f64,
    },
    #[error("sequence {sequence}: time t={time} at pair {index} does not increase")]
    NotIncreasing {
        sequence: usize,
        index: usize,
        time: f64,
    },
    #[error("sequence {sequence}: time t={time} is outside the horizon")]
    OutOfHorizon { sequence: usize, time: f64 },
    #[error("sequence {sequence}: unknown region {region} at t={time}")]
    UnknownRegion {
        sequence: usize,
        time: f64,
        region: RegionId,
    },
    #[error("containment violated: trajectory leaves region {region} at t={time}")]
    Containment { time: f64, region: RegionId },
    #[error("not maximal: region {region} is released at t={time} while still containing the trajectory")]
    NotMaximal { time: f64, region: RegionId },
    #[error("disjointness violated: region {region} used by two sequences at t={time}")]
    Overlap { time: f64, region: RegionId },
    #[error("expected {expected} tracking sequences, found {found}")]
    WrongSequenceCount { expected: usize, found: usize },
}

impl Violation {
    pub fn time(&self) -> Option<f64> {
        match *self {
            Violation::BadStart { time, .. }
            | Violation::NotIncreasing { time, .. }
            | Violation::OutOfHorizon { time, .. }
            | Violation::UnknownRegion { time, .. }
            | Violation::Containment { time, .. }
            | Violation::NotMaximal { time, .. }
            | Violation::Overlap { time, .. } => Some(time),
            _ => None,
        }
    }

    pub fn region(&self) -> Option<RegionId> {
        match *self {
            Violation::UnknownRegion { region, .. }
            | Violation::Containment { region, .. }
            | Violation::NotMaximal { region, .. }
            | Violation::Overlap { region, .. } => Some(region),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OfflineError {
    #[error(transparent)]
    Events(#[from] EventError),
    #[error(
        "coverage {required} unavailable at t={time}: only {found} regions contain the trajectory"
    )]
    CoverageGap {
        time: f64,
        required: usize,
        found: usize,
    },
    #[error("coverage must be at least 1")]
    ZeroCoverage,
    #[error("instance too large for exhaustive search ({states} states)")]
    TooLarge { states: usize },
}

pub fn validate(
    regions: &[Region],
    trajectory: &Trajectory,
    seq: &TrackingSequence,
    require_maximality: bool,
) -> Result<(), Violation> {
    let timeline = coverage_timeline(regions, trajectory)?;
    validate_sequence(regions, trajectory, &timeline, seq, 0, require_maximality)
}

/// Validation against a precomputed timeline of the same scenario.
pub fn validate_sequence(
    regions: &[Region],
    trajectory: &Trajectory,
    timeline: &CoverageTimeline,
    seq: &TrackingSequence,
    sequence: usize,
    require_maximality: bool,
) -> Result<(), Violation> {
    let by_id: BTreeMap<RegionId, &Region> = regions.iter().map(|r| (r.id, r)).collect();
    let (start, end) = (timeline.start, timeline.end);
    let &(first, _) = seq.pairs.first().ok_or(Violation::Empty { sequence })?;
    if (first - start).abs() > EPS {
        return Err(Violation::BadStart {
            sequence,
            time: first,
            expected: start,
        });
    }
    for (index, w) in seq.pairs.windows(2).enumerate() {
        if !(w[1].0 > w[0].0) {
            return Err(Violation::NotIncreasing {
                sequence,
                index: index + 1,
                time: w[1].0,
            });
        }
    }
    for &(time, region) in &seq.pairs {
        if time > end + EPS {
            return Err(Violation::OutOfHorizon { sequence, time });
        }
        if !by_id.contains_key(&region) {
            return Err(Violation::UnknownRegion {
                sequence,
                time,
                region,
            });
        }
    }
    let spans = seq.spans(end);
    let last = spans.len() - 1;
    for (i, &(a, b, region)) in spans.iter().enumerate() {
        let a = a.max(start);
        let held = timeline
            .intervals(region)
            .iter()
            .find(|&&(x, y)| x <= a + EPS && y >= a - EPS && (y > a || a >= end - EPS));
        let Some(&(_, y)) = held else {
            return Err(Violation::Containment { time: a, region });
        };
        if y < b - EPS {
            return Err(Violation::Containment { time: y, region });
        }
        if let Some(time) = spot_check(by_id[&region], trajectory, a, b) {
            return Err(Violation::Containment { time, region });
        }
        if require_maximality && i < last && y > b + EPS {
            return Err(Violation::NotMaximal { time: b, region });
        }
    }
    Ok(())
}

/// Geometric containment test at the span ends and every sample inside it.
fn spot_check(region: &Region, trajectory: &Trajectory, a: f64, b: f64) -> Option<f64> {
    let inner = trajectory
        .samples()
        .iter()
        .map(|s| s.0)
        .filter(|&t| t > a && t < b);
    [a, b]
        .into_iter()
        .chain(inner)
        .find(|&t| region.signed_depth(&trajectory.position_at(t)) < -1e-7)
}

pub fn validate_c(
    regions: &[Region],
    trajectory: &Trajectory,
    sol: &CoverageSolution,
    c: usize,
) -> Result<(), Violation> {
    let timeline = coverage_timeline(regions, trajectory)?;
    validate_c_with_timeline(regions, trajectory, &timeline, sol, c)
}

pub fn validate_c_with_timeline(
    regions: &[Region],
    trajectory: &Trajectory,
    timeline: &CoverageTimeline,
    sol: &CoverageSolution,
    c: usize,
) -> Result<(), Violation> {
    if sol.sequences.len() != c {
        return Err(Violation::WrongSequenceCount {
            expected: c,
            found: sol.sequences.len(),
        });
    }
    for (i, seq) in sol.sequences.iter().enumerate() {
        validate_sequence(regions, trajectory, timeline, seq, i, c == 1)?;
    }
    let spans: Vec<Vec<(f64, f64, RegionId)>> = sol
        .sequences
        .iter()
        .map(|s| s.spans(timeline.end))
        .collect();
    for i in 0..spans.len() {
        for j in i + 1..spans.len() {
            for &(a1, b1, r1) in &spans[i] {
                for &(a2, b2, r2) in &spans[j] {
                    if r1 == r2 && a1.max(a2) <= b1.min(b2) {
                        return Err(Violation::Overlap {
                            time: a1.max(a2),
                            region: r1,
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

fn pick_longest(
    timeline: &CoverageTimeline,
    t: f64,
    exclude: &BTreeSet<RegionId>,
) -> Option<(RegionId, f64)> {
    timeline
        .regions()
        .filter(|id| !exclude.contains(id))
        .filter_map(|id| timeline.interval_at(id, t).map(|(_, b)| (id, b)))
        .fold(None, |best: Option<(RegionId, f64)>, cand| match best {
            Some(bst) if bst.1 >= cand.1 => Some(bst),
            _ => Some(cand),
        })
}

/// Always switch to the available region that contains the trajectory
/// furthest into the future; ties go to the lower id.
pub fn greedy_offline(timeline: &CoverageTimeline) -> Result<TrackingSequence, OfflineError> {
    greedy_with_override(timeline, None)
}

fn greedy_with_override(
    timeline: &CoverageTimeline,
    forced: Option<(usize, RegionId)>,
) -> Result<TrackingSequence, OfflineError> {
    let mut seq = TrackingSequence::default();
    let mut t = timeline.start;
    loop {
        let decision = seq.pairs.len();
        let pick = match forced {
            Some((d, id)) if d == decision => timeline.interval_at(id, t).map(|(_, b)| (id, b)),
            _ => pick_longest(timeline, t, &BTreeSet::new()),
        };
        let (id, b) = pick.ok_or(OfflineError::CoverageGap {
            time: t,
            required: 1,
            found: 0,
        })?;
        seq.pairs.push((t, id));
        if b >= timeline.end {
            return Ok(seq);
        }
        t = b;
    }
}

/// Greedy for `c` mutually disjoint sequences: start with the `c` longest
/// available regions and replace each one by the longest available region
/// when it is exited.
pub fn greedy_offline_c(
    timeline: &CoverageTimeline,
    c: usize,
) -> Result<CoverageSolution, OfflineError> {
    if c == 0 {
        return Err(OfflineError::ZeroCoverage);
    }
    let mut held: Vec<(RegionId, f64)> = Vec::with_capacity(c);
    let mut sol = CoverageSolution {
        sequences: vec![TrackingSequence::default(); c],
    };
    let mut t = timeline.start;
    let mut release: Vec<usize> = (0..c).collect();
    loop {
        let mut taken: BTreeSet<RegionId> = held
            .iter()
            .enumerate()
            .filter(|(i, _)| !release.contains(i))
            .map(|(_, h)| h.0)
            .collect();
        for &track in &release {
            let Some(pick) = pick_longest(timeline, t, &taken) else {
                let found = timeline.covering(t).len();
                return Err(OfflineError::CoverageGap {
                    time: t,
                    required: c,
                    found,
                });
            };
            taken.insert(pick.0);
            sol.sequences[track].pairs.push((t, pick.0));
            if track < held.len() {
                held[track] = pick;
            } else {
                held.push(pick);
            }
        }
        let next = held
            .iter()
            .map(|h| h.1)
            .filter(|&b| b < timeline.end)
            .min_by(f64::total_cmp);
        let Some(next) = next else {
            return Ok(sol);
        };
        t = next;
        release = (0..c).filter(|&i| held[i].1 == next).collect();
    }
}

fn pieces(timeline: &CoverageTimeline) -> Vec<BTreeSet<RegionId>> {
    if timeline.is_instant() {
        return vec![timeline.covering_piece(timeline.start, timeline.start)];
    }
    timeline
        .elementary_pieces()
        .into_iter()
        .map(|(a, b)| timeline.covering_piece(a, b))
        .collect()
}

/// Exact minimum cost over all valid tracking sequences, by dynamic
/// programming over elementary time pieces.
pub fn optimal_oracle(timeline: &CoverageTimeline) -> Result<usize, OfflineError> {
    let mut prev: BTreeMap<RegionId, usize> = BTreeMap::new();
    for (j, cover) in pieces(timeline).into_iter().enumerate() {
        let best_prev = prev.values().copied().min();
        if cover.is_empty() {
            return Err(OfflineError::CoverageGap {
                time: piece_time(timeline, j),
                required: 1,
                found: 0,
            });
        }
        prev = cover
            .into_iter()
            .map(|r| {
                let switch = best_prev.map_or(1, |b| b + 1);
                let stay = prev.get(&r).copied().unwrap_or(usize::MAX);
                (r, switch.min(stay))
            })
            .collect();
    }
    Ok(prev.values().copied().min().unwrap_or(0))
}

fn piece_time(timeline: &CoverageTimeline, j: usize) -> f64 {
    timeline
        .elementary_pieces()
        .get(j)
        .map_or(timeline.start, |p| p.0)
}

const ORACLE_STATE_CAP: usize = 50_000;

/// Exact minimum total cost of `c` disjoint sequences by dynamic programming
/// over ordered assignments of distinct regions to tracks on each piece.
/// Exponential; intended for tiny instances.
pub fn optimal_oracle_c(timeline: &CoverageTimeline, c: usize) -> Result<usize, OfflineError> {
    if c == 0 {
        return Err(OfflineError::ZeroCoverage);
    }
    let mut prev: BTreeMap<Vec<RegionId>, usize> = BTreeMap::new();
    for (j, cover) in pieces(timeline).into_iter().enumerate() {
        let cover: Vec<RegionId> = cover.into_iter().collect();
        if cover.len() < c {
            return Err(OfflineError::CoverageGap {
                time: piece_time(timeline, j),
                required: c,
                found: cover.len(),
            });
        }
        let tuples = arrangements(&cover, c);
        if tuples.len() * prev.len().max(1) > ORACLE_STATE_CAP * 20
            || tuples.len() > ORACLE_STATE_CAP
        {
            return Err(OfflineError::TooLarge {
                states: tuples.len(),
            });
        }
        let mut next = BTreeMap::new();
        for v in tuples {
            let cost = if prev.is_empty() {
                Some(c)
            } else {
                prev.iter()
                    .filter_map(|(u, &cu)| transition_cost(u, &v).map(|d| cu + d))
                    .min()
            };
            if let Some(cost) = cost {
                next.insert(v, cost);
            }
        }
        if next.is_empty() {
            return Err(OfflineError::CoverageGap {
                time: piece_time(timeline, j),
                required: c,
                found: cover.len(),
            });
        }
        prev = next;
    }
    Ok(prev.values().copied().min().unwrap_or(0))
}

/// Number of tracks that switch between consecutive assignments, or `None`
/// when a region would pass directly from one track to another.
fn transition_cost(u: &[RegionId], v: &[RegionId]) -> Option<usize> {
    let mut cost = 0;
    for (i, (a, b)) in u.iter().zip(v).enumerate() {
        if a != b {
            if u.iter().enumerate().any(|(k, x)| k != i && x == b) {
                return None;
            }
            cost += 1;
        }
    }
    Some(cost)
}

fn arrangements(items: &[RegionId], c: usize) -> Vec<Vec<RegionId>> {
    fn rec(items: &[RegionId], c: usize, cur: &mut Vec<RegionId>, out: &mut Vec<Vec<RegionId>>) {
        if cur.len() == c {
            out.push(cur.clone());
            return;
        }
        for &x in items {
            if !cur.contains(&x) {
                cur.push(x);
                rec(items, c, cur, out);
                cur.pop();
            }
        }
    }
    let mut out = Vec::new();
    rec(items, c, &mut Vec::with_capacity(c), &mut out);
    out
}

impl fmt::Display for TrackingSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .pairs
            .iter()
            .map(|(t, id)| format!("({t}, {id})"))
            .collect();
        write!(f, "[{}]", parts.join(", "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Point;

    fn timeline(end: f64, ivs: &[(u32, f64, f64)]) -> CoverageTimeline {
        let mut map: BTreeMap<RegionId, Vec<(f64, f64)>> = BTreeMap::new();
        for &(id, a, b) in ivs {
            map.entry(RegionId(id)).or_default().push((a, b));
        }
        CoverageTimeline::from_intervals(0.0, end, map)
    }

    fn traj1(samples: &[(f64, f64)]) -> Trajectory {
        Trajectory::new(samples.iter().map(|&(t, x)| (t, Point::one(x))).collect()).unwrap()
    }

    #[test]
    fn one_region_costs_one() {
        let tl = timeline(5.0, &[(0, 0.0, 5.0)]);
        assert_eq!(greedy_offline(&tl).unwrap().pairs, vec![(0.0, RegionId(0))]);
        assert_eq!(optimal_oracle(&tl).unwrap(), 1);
    }

    #[test]
    fn forced_switch() {
        let tl = timeline(3.0, &[(0, 0.0, 2.0), (1, 1.0, 3.0)]);
        let s = greedy_offline(&tl).unwrap();
        assert_eq!(s.pairs, vec![(0.0, RegionId(0)), (2.0, RegionId(1))]);
        assert_eq!(optimal_oracle(&tl).unwrap(), 2);
    }

    #[test]
    fn greedy_prefers_latest_end_then_lowest_id() {
        let tl = timeline(
            4.0,
            &[(3, 0.0, 2.0), (1, 0.0, 3.0), (2, 0.0, 3.0), (0, 2.5, 4.0)],
        );
        let s = greedy_offline(&tl).unwrap();
        assert_eq!(s.pairs, vec![(0.0, RegionId(1)), (3.0, RegionId(0))]);
    }

    #[test]
    fn greedy_reports_gap() {
        let tl = timeline(4.0, &[(0, 0.0, 2.0), (1, 2.5, 4.0)]);
        assert!(
            matches!(greedy_offline(&tl), Err(OfflineError::CoverageGap { time, .. }) if time == 2.0)
        );
        assert!(optimal_oracle(&tl).is_err());
    }

    #[test]
    fn perturbing_a_greedy_choice_never_helps() {
        let tl = timeline(
            10.0,
            &[
                (0, 0.0, 3.0),
                (1, 0.0, 5.0),
                (2, 2.0, 7.0),
                (3, 4.0, 10.0),
                (4, 4.5, 8.0),
                (5, 6.0, 10.0),
                (6, 1.0, 6.5),
            ],
        );
        let best = greedy_offline(&tl).unwrap();
        for (d, &(t, _)) in best.pairs.iter().enumerate() {
            for id in tl.covering(t) {
                let alt = greedy_with_override(&tl, Some((d, id))).unwrap();
                assert!(alt.cost() >= best.cost());
            }
        }
        assert_eq!(best.cost(), optimal_oracle(&tl).unwrap());
    }

    #[test]
    fn greedy_c_with_full_cover() {
        let tl = timeline(1.0, &[(0, 0.0, 1.0), (1, 0.0, 1.0), (2, 0.0, 1.0)]);
        let sol = greedy_offline_c(&tl, 3).unwrap();
        assert_eq!(sol.total_cost(), 3);
        assert_eq!(optimal_oracle_c(&tl, 3).unwrap(), 3);
    }

    #[test]
    fn greedy_c_matches_oracle_on_small_instance() {
        let tl = timeline(
            6.0,
            &[
                (0, 0.0, 2.0),
                (1, 0.0, 3.0),
                (2, 0.0, 4.5),
                (3, 1.5, 6.0),
                (4, 2.5, 5.0),
                (5, 3.5, 6.0),
            ],
        );
        for c in 1..=2 {
            let sol = greedy_offline_c(&tl, c).unwrap();
            assert_eq!(sol.total_cost(), optimal_oracle_c(&tl, c).unwrap(), "c={c}");
        }
        assert_eq!(
            optimal_oracle_c(&tl, 1).unwrap(),
            optimal_oracle(&tl).unwrap()
        );
    }

    #[test]
    fn handing_region_between_tracks_is_forbidden() {
        assert_eq!(
            transition_cost(&[RegionId(0), RegionId(1)], &[RegionId(1), RegionId(2)]),
            None
        );
        assert_eq!(
            transition_cost(&[RegionId(0), RegionId(1)], &[RegionId(2), RegionId(1)]),
            Some(1)
        );
    }

    #[test]
    fn validate_detects_containment_and_maximality() {
        let regions = vec![
            Region::interval(0, 0.0, 1.0).unwrap(),
            Region::interval(1, 0.4, 3.0).unwrap(),
        ];
        let t = traj1(&[(0.0, 0.5), (2.0, 2.5)]);
        let good = TrackingSequence {
            pairs: vec![(0.0, RegionId(0)), (0.5, RegionId(1))],
        };
        assert_eq!(validate(&regions, &t, &good, true), Ok(()));
        let only0 = TrackingSequence {
            pairs: vec![(0.0, RegionId(0))],
        };
        let err = validate(&regions, &t, &only0, false).unwrap_err();
        assert_eq!(
            err,
            Violation::Containment {
                time: 0.5,
                region: RegionId(0)
            }
        );
        let early = TrackingSequence {
            pairs: vec![(0.0, RegionId(0)), (0.1, RegionId(1))],
        };
        assert_eq!(validate(&regions, &t, &early, false), Ok(()));
        assert_eq!(
            validate(&regions, &t, &early, true).unwrap_err(),
            Violation::NotMaximal {
                time: 0.1,
                region: RegionId(0)
            }
        );
        let unknown = TrackingSequence {
            pairs: vec![(0.0, RegionId(9))],
        };
        assert!(matches!(
            validate(&regions, &t, &unknown, false),
            Err(Violation::UnknownRegion { .. })
        ));
    }

    #[test]
    fn validate_c_detects_shared_region() {
        let regions = vec![
            Region::interval(0, -5.0, 5.0).unwrap(),
            Region::interval(1, -5.0, 5.0).unwrap(),
        ];
        let t = traj1(&[(0.0, 0.0), (1.0, 1.0)]);
        let seq = |id| TrackingSequence {
            pairs: vec![(0.0, RegionId(id))],
        };
        let ok = CoverageSolution {
            sequences: vec![seq(0), seq(1)],
        };
        assert_eq!(validate_c(&regions, &t, &ok, 2), Ok(()));
        let shared = CoverageSolution {
            sequences: vec![seq(0), seq(0)],
        };
        assert_eq!(
            validate_c(&regions, &t, &shared, 2),
            Err(Violation::Overlap {
                time: 0.0,
                region: RegionId(0)
            })
        );
        assert!(matches!(
            validate_c(&regions, &t, &ok, 1),
            Err(Violation::WrongSequenceCount { .. })
        ));
    }

    #[test]
    fn sequence_json_shape() {
        let s = TrackingSequence {
            pairs: vec![(0.0, RegionId(3)), (1.5, RegionId(1))],
        };
        assert_eq!(
            serde_json::to_string(&s).unwrap(),
            r#"{"pairs":[[0.0,3],[1.5,1]]}"#
        );
        let sol = CoverageSolution::single(s.clone());
        let back: CoverageSolution =
            serde_json::from_str(&serde_json::to_string(&sol).unwrap()).unwrap();
        assert_eq!(back, sol);
    }
}
