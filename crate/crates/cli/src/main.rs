use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use handover_core::adversary::{
    flower, interval_tree, rhombi_construction, run_deterministic_adversary,
    run_stateless_adversary, trilateration_lb, AdversaryError, NearestCenterPolicy,
};
use handover_core::events::{coverage_timeline, event_stream};
use handover_core::harness::{run, ScenarioConfig, ScenarioSource};
use handover_core::offline::{
    greedy_offline_c, validate_c, validate_sequence, CoverageSolution, TrackingSequence,
};
use handover_core::online::{build_tracker, drive, TrackerKind};
use handover_core::scenario::ScenarioFile;

#[derive(Parser)]
#[command(
    name = "handover",
    version,
    about = "Offline and online handover minimization for moving-point tracking"
)]
struct Cli {
    /// Seed for randomized trackers
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the primary output here instead of stdout
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Check a solution against a scenario
    Validate {
        scenario: PathBuf,
        solution: PathBuf,
        /// Require every region to be kept until it is exited
        #[arg(long)]
        maximality: bool,
        #[arg(long)]
        coverage: Option<usize>,
        /// Trajectory of the scenario's distribution to use
        #[arg(long)]
        index: Option<usize>,
    },
    /// Optimal offline solution
    Offline {
        scenario: PathBuf,
        #[arg(long)]
        coverage: Option<usize>,
        #[arg(long)]
        index: Option<usize>,
    },
    /// Run an online tracker over the scenario's trajectory
    Online {
        scenario: PathBuf,
        #[arg(long)]
        tracker: TrackerKind,
        #[arg(long)]
        coverage: Option<usize>,
        #[arg(long)]
        index: Option<usize>,
    },
    /// Export a lower-bound construction as a scenario
    Adversary {
        #[arg(long, value_enum)]
        construction: ConstructionArg,
        #[arg(long)]
        ply: Option<usize>,
        #[arg(long)]
        coverage: Option<usize>,
        /// Flower: number of adversary updates (default 10·(ply−1))
        #[arg(long)]
        updates: Option<usize>,
        /// Flower: tracker the adversary plays against
        #[arg(long, default_value = "det-first")]
        tracker: TrackerKind,
        /// Rhombi: oscillation rounds
        #[arg(long, default_value_t = 5)]
        rounds: usize,
    },
    /// Run an experiment configuration
    Bench {
        config: PathBuf,
        /// Also write the aggregate JSON here
        #[arg(long)]
        aggregate: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ConstructionArg {
    Rhombi,
    Flower,
    Tree,
    Trilat,
}

enum Failure {
    Validation(String),
    Input(anyhow::Error),
    SelfCheck(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Input(e)
    }
}

impl From<AdversaryError> for Failure {
    fn from(e: AdversaryError) -> Self {
        match e {
            AdversaryError::SelfCheck(m) => Failure::SelfCheck(m),
            other => Failure::Input(other.into()),
        }
    }
}

/// Either a bare tracking sequence or a full multi-sequence solution.
#[derive(Deserialize)]
#[serde(untagged)]
enum SolutionDoc {
    Multi(CoverageSolution),
    Single(TrackingSequence),
}

#[derive(Serialize)]
struct SolutionOut<'a> {
    cost: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    tracker: Option<&'a str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    sequences: &'a [TrackingSequence],
}

fn load_scenario(path: &Path) -> anyhow::Result<ScenarioFile> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ScenarioFile::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(output: &Option<PathBuf>, text: &str) -> anyhow::Result<()> {
    match output {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                out.write_all(b"\n")?;
            }
            Ok(())
        }
    }
}

fn solution_text(
    sol: &CoverageSolution,
    format: Format,
    tracker: Option<&str>,
    seed: Option<u64>,
) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(&SolutionOut {
            cost: sol.total_cost(),
            tracker,
            seed,
            sequences: &sol.sequences,
        })
        .expect("solution serializes"),
        Format::Csv => {
            let mut s = String::from("sequence,time,region_id\n");
            for (i, seq) in sol.sequences.iter().enumerate() {
                for (t, id) in &seq.pairs {
                    s.push_str(&format!("{i},{t},{id}\n"));
                }
            }
            s
        }
    }
}

fn coverage_of(arg: Option<usize>, s: &ScenarioFile) -> anyhow::Result<usize> {
    match arg.unwrap_or(s.coverage) {
        0 => Err(anyhow!("coverage must be at least 1")),
        c => Ok(c),
    }
}

fn cmd_validate(
    scenario: &Path,
    solution: &Path,
    maximality: bool,
    coverage: Option<usize>,
    index: Option<usize>,
) -> Result<String, Failure> {
    let s = load_scenario(scenario)?;
    let c = coverage_of(coverage, &s)?;
    let t = s.trajectory_at(index).map_err(anyhow::Error::from)?;
    let text =
        fs::read_to_string(solution).with_context(|| format!("reading {}", solution.display()))?;
    let sol = match serde_json::from_str::<SolutionDoc>(&text).context("parsing solution")? {
        SolutionDoc::Multi(m) => m,
        SolutionDoc::Single(seq) => CoverageSolution::single(seq),
    };
    let result = if c == 1 && sol.sequences.len() == 1 {
        let tl = coverage_timeline(&s.regions, t).map_err(anyhow::Error::from)?;
        validate_sequence(&s.regions, t, &tl, &sol.sequences[0], 0, maximality)
    } else {
        validate_c(&s.regions, t, &sol, c)
    };
    match result {
        Ok(()) => Ok(json!({"valid": true, "cost": sol.total_cost()}).to_string()),
        Err(v) => Err(Failure::Validation(v.to_string())),
    }
}

fn cmd_offline(
    scenario: &Path,
    coverage: Option<usize>,
    index: Option<usize>,
    format: Format,
) -> Result<String, Failure> {
    let s = load_scenario(scenario)?;
    let c = coverage_of(coverage, &s)?;
    let t = s.trajectory_at(index).map_err(anyhow::Error::from)?;
    let tl = coverage_timeline(&s.regions, t).map_err(anyhow::Error::from)?;
    let sol = greedy_offline_c(&tl, c).map_err(anyhow::Error::from)?;
    Ok(solution_text(&sol, format, None, None))
}

fn cmd_online(
    scenario: &Path,
    kind: TrackerKind,
    coverage: Option<usize>,
    index: Option<usize>,
    seed: u64,
    format: Format,
) -> Result<String, Failure> {
    let s = load_scenario(scenario)?;
    let c = coverage_of(coverage, &s)?;
    let t = s.trajectory_at(index).map_err(anyhow::Error::from)?;
    let stream = event_stream(&s.regions, t).map_err(anyhow::Error::from)?;
    let mut tracker = build_tracker(kind, &s.regions, c, seed).map_err(anyhow::Error::from)?;
    let sol = drive(tracker.as_mut(), &stream).map_err(anyhow::Error::from)?;
    let seed = (!kind.is_deterministic()).then_some(seed);
    Ok(solution_text(&sol, format, Some(kind.as_str()), seed))
}

fn cmd_adversary(
    construction: ConstructionArg,
    ply: Option<usize>,
    coverage: Option<usize>,
    updates: Option<usize>,
    tracker: TrackerKind,
    rounds: usize,
    seed: u64,
) -> Result<String, Failure> {
    let need_ply =
        || ply.ok_or_else(|| Failure::Input(anyhow!("--ply is required for this construction")));
    let scenario = match construction {
        ConstructionArg::Rhombi => {
            let r = rhombi_construction()?;
            let run = run_stateless_adversary(&NearestCenterPolicy::new(&r.regions), rounds)?;
            ScenarioFile::new(run.regions, 1)
                .map_err(anyhow::Error::from)?
                .with_trajectory(run.trajectory)
        }
        ConstructionArg::Flower => {
            let rho = need_ply()?;
            let updates = updates.unwrap_or(10 * rho.saturating_sub(1));
            flower(rho)?;
            let run = run_deterministic_adversary(
                &|regions| build_tracker(tracker, regions, 1, seed),
                rho,
                updates,
            )?;
            ScenarioFile::new(run.regions, 1)
                .map_err(anyhow::Error::from)?
                .with_trajectory(run.trajectory)
        }
        ConstructionArg::Tree => {
            let t = interval_tree(need_ply()?)?;
            ScenarioFile::new(t.regions, 1)
                .map_err(anyhow::Error::from)?
                .with_distribution(t.distribution)
        }
        ConstructionArg::Trilat => {
            let c = coverage.unwrap_or(2);
            let t = trilateration_lb(need_ply()?, c)?;
            ScenarioFile::new(t.regions, c)
                .map_err(anyhow::Error::from)?
                .with_distribution(t.distribution)
        }
    };
    Ok(scenario.to_json())
}

fn cmd_bench(
    config: &Path,
    aggregate: &Option<PathBuf>,
    format: Format,
) -> Result<String, Failure> {
    let text =
        fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let mut cfg: ScenarioConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", config.display()))?;
    if let ScenarioSource::File { path } = &mut cfg.scenario {
        if path.is_relative() {
            *path = config.parent().unwrap_or(Path::new(".")).join(&*path);
        }
    }
    let result = run(&cfg).map_err(anyhow::Error::from)?;
    let agg = serde_json::to_string_pretty(&result.aggregate).expect("aggregate serializes");
    if let Some(p) = aggregate {
        fs::write(p, &agg).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(match format {
        Format::Csv => result.csv_string(),
        Format::Json => agg,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let format = cli.format.unwrap_or(match cli.command {
        Command::Bench { .. } => Format::Csv,
        _ => Format::Json,
    });
    let outcome = match &cli.command {
        Command::Validate {
            scenario,
            solution,
            maximality,
            coverage,
            index,
        } => cmd_validate(scenario, solution, *maximality, *coverage, *index),
        Command::Offline {
            scenario,
            coverage,
            index,
        } => cmd_offline(scenario, *coverage, *index, format),
        Command::Online {
            scenario,
            tracker,
            coverage,
            index,
        } => cmd_online(scenario, *tracker, *coverage, *index, cli.seed, format),
        Command::Adversary {
            construction,
            ply,
            coverage,
            updates,
            tracker,
            rounds,
        } => cmd_adversary(
            *construction,
            *ply,
            *coverage,
            *updates,
            *tracker,
            *rounds,
            cli.seed,
        ),
        Command::Bench { config, aggregate } => cmd_bench(config, aggregate, format),
    };
    let outcome = outcome.and_then(|text| emit(&cli.output, &text).map_err(Failure::Input));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(m)) => {
            eprintln!("invalid solution: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
        Err(Failure::SelfCheck(m)) => {
            eprintln!("construction self-check failed: {m}");
            ExitCode::from(4)
        }
    }
}
