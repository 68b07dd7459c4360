//! Experiment orchestration: random scenarios, per-trial competitive ratios
//! against the offline optimum, and aggregation.

use std::f64::consts::TAU;
use std::path::PathBuf;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::adversary::{
    interval_tree, rhombi_construction, run_deterministic_adversary, run_stateless_adversary,
    trilateration_lb, AdversaryError, NearestCenterPolicy, TrajectoryDistribution,
};
use crate::events::{
    coverage_timeline, event_stream, timeline_steps, CoverageTimeline, Trajectory,
};
use crate::geometry::{depth, ply, Point, Region};
use crate::offline::{greedy_offline_c, validate_c_with_timeline};
use crate::online::{build_tracker, drive, f_event_bound_check, TrackerKind};
use crate::scenario::{ScenarioError, ScenarioFile};
use crate::trial_seed;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scenario generation failed: {0}")]
    Generation(String),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("trial {trial} (seed {seed}) failed: {reason}")]
    Trial {
        trial: usize,
        seed: u64,
        reason: String,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Interval,
    Disk,
    Polygon,
    Mixed,
}

/// Parameters of a random scenario. Regions are placed uniformly in the box
/// `[-bbox, bbox]^d`; their half-widths (or radii) lie in `size`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomParams {
    pub n: usize,
    pub dimension: usize,
    pub shape: ShapeKind,
    pub segments: usize,
    #[serde(default = "default_bbox")]
    pub bbox: f64,
    #[serde(default = "default_size")]
    pub size: (f64, f64),
    #[serde(default = "default_coverage")]
    pub coverage: usize,
}

fn default_bbox() -> f64 {
    3.0
}

fn default_size() -> (f64, f64) {
    (0.8, 2.0)
}

fn default_coverage() -> usize {
    1
}

impl RandomParams {
    pub fn new(n: usize, dimension: usize, shape: ShapeKind, segments: usize) -> Self {
        RandomParams {
            n,
            dimension,
            shape,
            segments,
            bbox: default_bbox(),
            size: default_size(),
            coverage: 1,
        }
    }

    pub fn with_coverage(mut self, c: usize) -> Self {
        self.coverage = c;
        self
    }

    fn check(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        match (self.dimension, self.shape) {
            (1, ShapeKind::Interval)
            | (2, ShapeKind::Disk | ShapeKind::Polygon | ShapeKind::Mixed) => {}
            (1 | 2, _) => return bad("shape does not match dimension"),
            _ => return bad("dimension must be 1 or 2"),
        }
        if self.n == 0 || self.coverage == 0 {
            return bad("n and coverage must be positive");
        }
        if !(self.bbox > 0.0 && self.size.0 > 0.0 && self.size.1 >= self.size.0) {
            return bad("bbox and size must be positive with size.0 <= size.1");
        }
        Ok(())
    }
}

const START_TRIES: usize = 2000;
const SEGMENT_TRIES: usize = 200;

fn random_region(rng: &mut ChaCha8Rng, id: u32, p: &RandomParams) -> Result<Region, HarnessError> {
    let b = p.bbox;
    let size = rng.gen_range(p.size.0..=p.size.1);
    let region = match p.shape {
        ShapeKind::Interval => {
            let c = rng.gen_range(-b..=b);
            Region::interval(id, c - size, c + size)
        }
        shape => {
            let center = Point::two(rng.gen_range(-b..=b), rng.gen_range(-b..=b));
            let polygon = match shape {
                ShapeKind::Polygon => true,
                ShapeKind::Mixed => rng.gen_bool(0.5),
                _ => false,
            };
            if polygon {
                let k = rng.gen_range(3..=6);
                let phase = rng.gen_range(0.0..TAU);
                let vertices = (0..k)
                    .map(|i| {
                        let a = phase + TAU * i as f64 / k as f64;
                        Point::two(center.x() + size * a.cos(), center.y() + size * a.sin())
                    })
                    .collect();
                Region::polygon(id, vertices)
            } else {
                Region::disk(id, center, size)
            }
        }
    };
    region.map_err(|e| HarnessError::Generation(e.to_string()))
}

fn random_point(rng: &mut ChaCha8Rng, dim: usize, b: f64) -> Point {
    if dim == 1 {
        Point::one(rng.gen_range(-b..=b))
    } else {
        Point::two(rng.gen_range(-b..=b), rng.gen_range(-b..=b))
    }
}

/// Random regions and a random trajectory that keeps `coverage`-fold
/// coverage. Pieces leaving coverage are resampled a bounded number of times.
pub fn random_scenario(
    seed: u64,
    p: &RandomParams,
) -> Result<(Vec<Region>, Trajectory), HarnessError> {
    p.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let regions = (0..p.n as u32)
        .map(|id| random_region(&mut rng, id, p))
        .collect::<Result<Vec<_>, _>>()?;
    let depth_at = |q: &Point| depth(&regions, q).expect("same dimension");
    let start = (0..START_TRIES)
        .map(|_| random_point(&mut rng, p.dimension, p.bbox))
        .find(|q| depth_at(q) >= p.coverage)
        .ok_or_else(|| {
            HarnessError::Generation(format!("no start point with coverage {}", p.coverage))
        })?;
    let mut samples = vec![(0.0, start)];
    for _ in 0..p.segments {
        let (t, from) = *samples.last().unwrap();
        let mut accepted = None;
        for _ in 0..SEGMENT_TRIES {
            let len = rng.gen_range(0.1..=p.bbox);
            let to = if p.dimension == 1 {
                Point::one(from.x() + if rng.gen_bool(0.5) { len } else { -len })
            } else {
                let a = rng.gen_range(0.0..TAU);
                Point::two(from.x() + len * a.cos(), from.y() + len * a.sin())
            };
            let dt = rng.gen_range(0.5..=1.5);
            let piece = Trajectory::new(vec![(t, from), (t + dt, to)]).expect("increasing times");
            let covered =
                coverage_timeline(&regions, &piece).map(|tl| tl.first_gap(p.coverage).is_none());
            if covered.unwrap_or(false) {
                accepted = Some((t + dt, to));
                break;
            }
        }
        match accepted {
            Some(s) => samples.push(s),
            None => {
                return Err(HarnessError::Generation(
                    "could not extend trajectory inside coverage".into(),
                ))
            }
        }
    }
    let trajectory =
        Trajectory::new(samples).map_err(|e| HarnessError::Generation(e.to_string()))?;
    Ok((regions, trajectory))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "construction", rename_all = "lowercase", deny_unknown_fields)]
pub enum Construction {
    /// Trajectory drawn from the interval-tree distribution.
    Tree { ply: usize },
    /// Trajectory drawn from the two-length trilateration distribution.
    Trilat { ply: usize, coverage: usize },
    /// Adaptive flower adversary against the tracker.
    Flower { ply: usize, updates: usize },
    /// Rhombi adversary against the nearest-center stateless policy.
    Rhombi { rounds: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "lowercase")]
pub enum ScenarioSource {
    Inline { scenario: Box<ScenarioFile> },
    File { path: PathBuf },
    Random(RandomParams),
    Construction(Construction),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub scenario: ScenarioSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tracker: Option<TrackerKind>,
    pub seed: u64,
    pub trials: usize,
}

/// One trial. Only the first nine fields are written to CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub alg_cost: usize,
    pub opt_cost: usize,
    pub ratio: f64,
    pub k: usize,
    pub ply: usize,
    pub c: usize,
    pub m: Option<usize>,
    #[serde(skip)]
    pub max_step_picks: usize,
    #[serde(skip)]
    pub f_bound_ok: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean_ratio: f64,
    pub max_ratio: f64,
    /// Half-width of the normal-approximation 95% interval of the mean ratio.
    pub ci95: f64,
    pub trials: usize,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Aggregate {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n.max(1) as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Aggregate {
            mean_ratio: mean,
            max_ratio: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            ci95: 1.96 * (var / n.max(1) as f64).sqrt(),
            trials: n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub trials: Vec<TrialResult>,
    pub aggregate: Aggregate,
}

impl ExperimentResult {
    pub fn mean_cost(&self) -> f64 {
        self.trials.iter().map(|t| t.alg_cost as f64).sum::<f64>() / self.trials.len() as f64
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), HarnessError> {
        let mut out = csv::Writer::from_writer(w);
        for t in &self.trials {
            out.serialize(t)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

enum Prepared {
    Fixed {
        regions: Vec<Region>,
        ply: usize,
        c: usize,
        trajectories: TrajectoryDistribution,
    },
    Random(RandomParams),
    Flower {
        ply: usize,
        updates: usize,
    },
    Rhombi {
        rounds: usize,
    },
}

fn prepare(source: &ScenarioSource) -> Result<Prepared, HarnessError> {
    let fixed = |regions: Vec<Region>, c: usize, trajectories: TrajectoryDistribution| {
        let ply = ply(&regions).map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(Prepared::Fixed {
            regions,
            ply,
            c,
            trajectories,
        })
    };
    let adv = |e: AdversaryError| HarnessError::Config(e.to_string());
    match source {
        ScenarioSource::Inline { scenario } => {
            from_file(scenario).and_then(|(r, c, d)| fixed(r, c, d))
        }
        ScenarioSource::File { path } => {
            let s = ScenarioFile::from_json(&std::fs::read_to_string(path)?)?;
            from_file(&s).and_then(|(r, c, d)| fixed(r, c, d))
        }
        ScenarioSource::Random(p) => {
            p.check()?;
            Ok(Prepared::Random(p.clone()))
        }
        ScenarioSource::Construction(Construction::Tree { ply }) => {
            let t = interval_tree(*ply).map_err(adv)?;
            fixed(t.regions, 1, t.distribution)
        }
        ScenarioSource::Construction(Construction::Trilat { ply, coverage }) => {
            let t = trilateration_lb(*ply, *coverage).map_err(adv)?;
            fixed(t.regions, *coverage, t.distribution)
        }
        ScenarioSource::Construction(Construction::Flower { ply, updates }) => {
            crate::adversary::flower(*ply).map_err(adv)?;
            Ok(Prepared::Flower {
                ply: *ply,
                updates: *updates,
            })
        }
        ScenarioSource::Construction(Construction::Rhombi { rounds }) => {
            rhombi_construction().map_err(adv)?;
            Ok(Prepared::Rhombi { rounds: *rounds })
        }
    }
}

fn from_file(
    s: &ScenarioFile,
) -> Result<(Vec<Region>, usize, TrajectoryDistribution), HarnessError> {
    s.check()?;
    let d = match (&s.trajectory, &s.distribution) {
        (_, Some(d)) => d.clone(),
        (Some(t), None) => {
            TrajectoryDistribution::uniform(vec![t.clone()]).expect("one trajectory")
        }
        (None, None) => {
            return Err(HarnessError::Config(
                "scenario has neither trajectory nor distribution".into(),
            ))
        }
    };
    Ok((s.regions.clone(), s.coverage, d))
}

fn draw<'a>(d: &'a TrajectoryDistribution, rng: &mut ChaCha8Rng) -> &'a Trajectory {
    let mut u: f64 = rng.gen();
    for (t, p) in d.iter() {
        if u < p {
            return t;
        }
        u -= p;
    }
    d.get(d.len() - 1).expect("nonempty distribution")
}

/// Runs one tracker on one trajectory and measures it against the optimum.
pub fn measure(
    regions: &[Region],
    trajectory: &Trajectory,
    kind: TrackerKind,
    c: usize,
    seed: u64,
    ply: usize,
) -> Result<TrialResult, String> {
    let stream = event_stream(regions, trajectory).map_err(|e| e.to_string())?;
    let timeline = CoverageTimeline::from_stream(&stream, regions.iter().map(|r| r.id));
    if let Some((time, found)) = timeline.first_gap(c) {
        return Err(format!("coverage {c} lost at t={time} ({found} regions)"));
    }
    let mut tracker = build_tracker(kind, regions, c, seed).map_err(|e| e.to_string())?;
    let sol = drive(tracker.as_mut(), &stream).map_err(|e| e.to_string())?;
    validate_c_with_timeline(regions, trajectory, &timeline, &sol, c).map_err(|e| e.to_string())?;
    let opt_cost = greedy_offline_c(&timeline, c)
        .map_err(|e| e.to_string())?
        .total_cost();
    let k = timeline_steps(&timeline).map_err(|e| e.to_string())?.len();
    let alg_cost = sol.total_cost();
    let m = tracker.f_events().map(|l| l.m());
    Ok(TrialResult {
        trial: 0,
        seed,
        alg_cost,
        opt_cost,
        ratio: alg_cost as f64 / opt_cost as f64,
        k,
        ply,
        c,
        m,
        max_step_picks: tracker.steps().iter().map(|s| s.picks).max().unwrap_or(0),
        f_bound_ok: tracker
            .f_events()
            .map(|l| f_event_bound_check(l, opt_cost, c)),
    })
}

fn run_trial(
    prep: &Prepared,
    kind: Option<TrackerKind>,
    trial: usize,
    seed: u64,
) -> Result<TrialResult, String> {
    let need_kind = || kind.ok_or_else(|| "config needs a tracker".to_string());
    // Stream 0 of `seed` belongs to the tracker; scenario draws use stream 1.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut r = match prep {
        Prepared::Fixed {
            regions,
            ply,
            c,
            trajectories,
        } => {
            let t = draw(trajectories, &mut rng);
            measure(regions, t, need_kind()?, *c, seed, *ply)?
        }
        Prepared::Random(p) => {
            let (regions, t) = random_scenario(rng.next_u64(), p).map_err(|e| e.to_string())?;
            let ply = ply(&regions).map_err(|e| e.to_string())?;
            measure(&regions, &t, need_kind()?, p.coverage, seed, ply)?
        }
        Prepared::Flower { ply, updates } => {
            let kind = need_kind()?;
            let run = run_deterministic_adversary(
                &|regions| build_tracker(kind, regions, 1, seed),
                *ply,
                *updates,
            )
            .map_err(|e| e.to_string())?;
            let tl = coverage_timeline(&run.regions, &run.trajectory).map_err(|e| e.to_string())?;
            let k = timeline_steps(&tl).map_err(|e| e.to_string())?.len();
            adversarial(seed, run.alg_cost, run.opt_cost, k, *ply)
        }
        Prepared::Rhombi { rounds } => {
            let regions = rhombi_construction().map_err(|e| e.to_string())?.regions;
            let run = run_stateless_adversary(&NearestCenterPolicy::new(&regions), *rounds)
                .map_err(|e| e.to_string())?;
            let tl = coverage_timeline(&run.regions, &run.trajectory).map_err(|e| e.to_string())?;
            let k = timeline_steps(&tl).map_err(|e| e.to_string())?.len();
            let ply = ply(&run.regions).map_err(|e| e.to_string())?;
            adversarial(seed, run.alg_cost, run.opt_cost, k, ply)
        }
    };
    r.trial = trial;
    Ok(r)
}

fn adversarial(seed: u64, alg_cost: usize, opt_cost: usize, k: usize, ply: usize) -> TrialResult {
    TrialResult {
        trial: 0,
        seed,
        alg_cost,
        opt_cost,
        ratio: alg_cost as f64 / opt_cost as f64,
        k,
        ply,
        c: 1,
        m: None,
        max_step_picks: 0,
        f_bound_ok: None,
    }
}

/// Runs all trials in parallel. Trial `i` uses `trial_seed(config.seed, i)`;
/// results are reported in trial order and the first failing trial aborts
/// the run.
pub fn run(config: &ScenarioConfig) -> Result<ExperimentResult, HarnessError> {
    if config.trials == 0 {
        return Err(HarnessError::Config("trials must be at least 1".into()));
    }
    let prep = prepare(&config.scenario)?;
    let results: Vec<Result<TrialResult, HarnessError>> = (0..config.trials)
        .into_par_iter()
        .map(|i| {
            let seed = trial_seed(config.seed, i as u64);
            run_trial(&prep, config.tracker, i, seed).map_err(|reason| HarnessError::Trial {
                trial: i,
                seed,
                reason,
            })
        })
        .collect();
    let trials = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let ratios: Vec<f64> = trials.iter().map(|t| t.ratio).collect();
    Ok(ExperimentResult {
        aggregate: Aggregate::of(&ratios),
        trials,
    })
}
