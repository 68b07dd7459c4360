use rayon::prelude::*;

use crate::events::{coverage_timeline, event_stream, Trajectory};
use crate::geometry::{ply, Point, Region};
use crate::offline::{greedy_offline_c, validate_c_with_timeline};
use crate::online::{build_tracker, drive, TrackerKind};
use crate::trial_seed;

use super::{AdversaryError, TrajectoryDistribution};

/// Shift between consecutive long intervals of the trilateration layout.
const LONG_SHIFT: f64 = 0.01;

/// Unit intervals sharing the point 0 together with a binary tree of
/// equiprobable trajectories that leave them in different orders.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalTree {
    pub regions: Vec<Region>,
    pub distribution: TrajectoryDistribution,
    /// Waypoint indices visited by each trajectory, starting with 0.
    pub xi: Vec<Vec<i64>>,
    /// Number of unit intervals carrying the tree.
    pub unit_count: usize,
    pub coverage: usize,
}

impl IntervalTree {
    pub fn ply(&self) -> usize {
        self.regions.len()
    }
}

fn log2_exact(n: usize) -> Option<u32> {
    (n >= 2 && n.is_power_of_two()).then(|| n.trailing_zeros())
}

/// Position of waypoint `xi`: for `xi > 0` outside the `xi` leftmost
/// intervals, for `xi < 0` outside the `|xi|` rightmost ones, inside the rest.
fn waypoint(n: usize, xi: i64) -> f64 {
    let delta = 1.0 / (2.0 * n as f64);
    match xi {
        0 => 0.0,
        k if k > 0 => (k as f64 + 0.5) * delta,
        k => -1.0 + (n as f64 - (-k) as f64 + 0.5) * delta,
    }
}

/// Waypoint index sequences: at level `i` the first half of every block of
/// `2^(h-i+1)` consecutive trajectories moves left past `2^(h-i)` more
/// intervals, the second half moves right.
fn xi_sequences(n: usize, h: u32) -> Vec<Vec<i64>> {
    (1..=n)
        .map(|j| {
            let mut xi = vec![0i64];
            for i in 1..=h {
                let step = 1i64 << (h - i);
                let left = (j - 1) % (1usize << (h - i + 1)) < (1usize << (h - i));
                let next = if left {
                    xi.iter().min().unwrap() - step
                } else {
                    xi.iter().max().unwrap() + step
                };
                xi.push(next);
            }
            xi
        })
        .collect()
}

fn unit_intervals(n: usize) -> Result<Vec<Region>, AdversaryError> {
    let delta = 1.0 / (2.0 * n as f64);
    (1..=n)
        .map(|k| {
            Ok(Region::interval(
                k as u32 - 1,
                -1.0 + k as f64 * delta,
                k as f64 * delta,
            )?)
        })
        .collect()
}

pub fn interval_tree(rho: usize) -> Result<IntervalTree, AdversaryError> {
    trilateration_lb(rho, 1)
}

/// `ρ − c + 1` unit intervals carrying the trajectory tree plus `c − 1`
/// intervals of length 2 covering all of them.
pub fn trilateration_lb(rho: usize, c: usize) -> Result<IntervalTree, AdversaryError> {
    if c == 0 || c > rho {
        return Err(AdversaryError::Parameter(format!(
            "coverage {c} must lie in 1..={rho}"
        )));
    }
    let n = rho - c + 1;
    let h = log2_exact(n).ok_or_else(|| {
        AdversaryError::Parameter(format!("{n} unit intervals is not a power of two >= 2"))
    })?;
    let mut regions = unit_intervals(n)?;
    for j in 0..c - 1 {
        let shift = j as f64 * LONG_SHIFT;
        regions.push(Region::interval(
            (n + j) as u32,
            -1.25 + shift,
            0.75 + shift,
        )?);
    }
    let xi = xi_sequences(n, h);
    let trajectories = xi
        .iter()
        .map(|seq| Trajectory::unit_timed(0.0, seq.iter().map(|&k| Point::one(waypoint(n, k)))))
        .collect::<Result<Vec<_>, _>>()?;
    let tree = IntervalTree {
        regions,
        distribution: TrajectoryDistribution::uniform(trajectories)?,
        xi,
        unit_count: n,
        coverage: c,
    };
    self_check(&tree)?;
    Ok(tree)
}

fn self_check(tree: &IntervalTree) -> Result<(), AdversaryError> {
    let fail = |m: String| Err(AdversaryError::SelfCheck(m));
    if ply(&tree.regions)? != tree.ply() {
        return fail("ply differs from the interval count".into());
    }
    let units = &tree.regions[..tree.unit_count];
    for (j, (t, _)) in tree.distribution.iter().enumerate() {
        let pts: Vec<Point> = t.samples().iter().map(|s| s.1).collect();
        if pts
            .iter()
            .any(|p| tree.regions.iter().any(|r| r.signed_depth(p).abs() < 1e-9))
        {
            return fail(format!("trajectory {j} touches an interval endpoint"));
        }
        let survivors = units
            .iter()
            .filter(|r| pts.iter().all(|p| r.signed_depth(p) > 0.0))
            .count();
        if survivors == 0 {
            return fail(format!("no unit interval contains all of trajectory {j}"));
        }
        if tree.regions[tree.unit_count..]
            .iter()
            .any(|r| pts.iter().any(|p| r.signed_depth(p) <= 0.0))
        {
            return fail(format!("a long interval misses trajectory {j}"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct YaoResult {
    /// Expected tracker cost under the distribution.
    pub expected: f64,
    /// Sum of costs and number of runs when every run has equal weight.
    pub exact: Option<(usize, usize)>,
    /// Offline optimum of each trajectory.
    pub opt_costs: Vec<usize>,
    pub runs: usize,
}

impl YaoResult {
    /// Whether the expected cost is at least `num / den`, compared exactly
    /// when an exact total is available.
    pub fn at_least(&self, num: usize, den: usize) -> bool {
        match self.exact {
            Some((total, runs)) => total * den >= num * runs,
            None => self.expected >= num as f64 / den as f64,
        }
    }
}

/// Expected cost of a tracker over a trajectory distribution. Deterministic
/// trackers are run once per trajectory; randomized ones `trials` times with
/// seeds derived from `seed`. Every output is validated.
pub fn yao_expected_cost(
    regions: &[Region],
    distribution: &TrajectoryDistribution,
    kind: TrackerKind,
    c: usize,
    trials: usize,
    seed: u64,
) -> Result<YaoResult, AdversaryError> {
    let trials = if kind.is_deterministic() {
        1
    } else {
        trials.max(1)
    };
    let per_traj = distribution
        .iter()
        .enumerate()
        .map(|(j, (t, p))| {
            let stream = event_stream(regions, t)?;
            let timeline = coverage_timeline(regions, t)?;
            let opt = greedy_offline_c(&timeline, c)?.total_cost();
            let costs = (0..trials)
                .into_par_iter()
                .map(|k| {
                    let s = trial_seed(seed, (j * trials + k) as u64);
                    let mut tracker = build_tracker(kind, regions, c, s)?;
                    let sol = drive(tracker.as_mut(), &stream)?;
                    validate_c_with_timeline(regions, t, &timeline, &sol, c)?;
                    Ok(sol.total_cost())
                })
                .collect::<Result<Vec<usize>, AdversaryError>>()?;
            Ok((p, opt, costs))
        })
        .collect::<Result<Vec<_>, AdversaryError>>()?;
    let expected = per_traj
        .iter()
        .map(|(p, _, costs)| p * costs.iter().sum::<usize>() as f64 / costs.len() as f64)
        .sum();
    let uniform = per_traj.windows(2).all(|w| w[0].0 == w[1].0);
    let runs = per_traj.iter().map(|(_, _, costs)| costs.len()).sum();
    let total = per_traj.iter().flat_map(|(_, _, costs)| costs).sum();
    Ok(YaoResult {
        expected,
        exact: uniform.then_some((total, runs)),
        opt_costs: per_traj.iter().map(|(_, o, _)| *o).collect(),
        runs,
    })
}
