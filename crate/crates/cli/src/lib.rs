//! The `mpcbench` command line: run controller matchups over scenarios,
//! score and rank them, validate scenario files and synthesize weather.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand};
use mpcbench_core::coupling::{run_matchup, Contender, MatchupError, SimulationLog};
use mpcbench_core::emulator::ZoneParams;
use mpcbench_core::kpi::{build_report, Kpi, ReportSet};
use mpcbench_core::ranking::{aggregate, emit_radar, normalize, rank, KpiOrientation, RadarScores, RankEntry};
use mpcbench_core::scenarios::{baseline_scenario, Scenario, SynthWeather};
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub mod config;

pub use config::{ReplanningArg, RunConfig, ScenarioSource};

/// Axes scored on every radar; planner time only appears on timed runs.
pub const SCORED_KPIS: [Kpi; 7] = [
    Kpi::EnergySavingsPct,
    Kpi::PeSavingsPct,
    Kpi::CostSavingsPct,
    Kpi::PctTimeOutsideComfort,
    Kpi::TotalDegreeHours,
    Kpi::PeakPowerReductionPct,
    Kpi::PlannerMeanTimeS,
];

#[derive(Debug, Parser)]
#[command(
    name = "mpcbench",
    version,
    about = "Benchmark building heating controllers against a simulated zone"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every controller on every scenario and write logs, KPIs, scores and radar charts.
    Run(RunArgs),
    /// Rank controllers from one or more report sets.
    Rank(RankArgs),
    /// Check a scenario file and list every problem found.
    Validate(ValidateArgs),
    /// Write a synthetic weather CSV.
    WeatherSynth(WeatherArgs),
    /// Print the built-in baseline scenario as JSON.
    Baseline,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Scenario file.
    #[arg(long, conflicts_with_all = ["baseline", "battery"])]
    pub scenario: Option<PathBuf>,
    /// Use the built-in baseline scenario (the default).
    #[arg(long)]
    pub baseline: bool,
    /// Battery spec generating a set of scenarios.
    #[arg(long, conflicts_with = "baseline")]
    pub battery: Option<PathBuf>,
    /// Comma-separated controller kinds, default hyperparameters.
    #[arg(long, default_value = "reactive,combinatorial,ga")]
    pub controllers: String,
    /// JSON list of `{"id": .., "config": {"kind": ..}}` entries; replaces --controllers.
    #[arg(long)]
    pub controller_config: Option<PathBuf>,
    /// Zone parameter file (JSON); built-in defaults otherwise.
    #[arg(long)]
    pub zone: Option<PathBuf>,
    #[arg(long, env = "MPCBENCH_OUT", default_value = "mpcbench-out")]
    pub out: PathBuf,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// Seed for every GA controller.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the scenarios' replanning mode.
    #[arg(long, value_enum)]
    pub replanning: Option<ReplanningArg>,
    /// Record planner wall time (makes reports non-reproducible).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    /// Report files (report.json) or run output directories.
    #[arg(required = true, num_args = 1..)]
    pub reports: Vec<PathBuf>,
    /// Also write ranking.csv and ranking.json here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub scenario: PathBuf,
}

#[derive(Debug, Args)]
pub struct WeatherArgs {
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 7)]
    pub days: usize,
    #[arg(long, default_value = "2024-01-15T00:00:00Z")]
    pub start: DateTime<Utc>,
    /// Daily mean temperature, °C.
    #[arg(long, default_value_t = 3.0, allow_negative_numbers = true)]
    pub mean: f64,
    /// Half the daily swing, °C.
    #[arg(long, default_value_t = 4.0)]
    pub amplitude: f64,
    /// Hourly noise standard deviation, °C.
    #[arg(long, default_value_t = 1.0)]
    pub noise: f64,
    /// Noon solar flux, W/m².
    #[arg(long, default_value_t = 350.0)]
    pub solar_peak: f64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_cli(cli: Cli) -> ExitCode {
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Rank(args) => cmd_rank(&args),
        Command::Validate(args) => cmd_validate(&args),
        Command::WeatherSynth(args) => cmd_weather_synth(&args),
        Command::Baseline => {
            println!("{}", baseline_scenario().to_json());
            Ok(ExitCode::SUCCESS)
        }
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    software: &'static str,
    version: &'static str,
    source: &'a ScenarioSource,
    scenarios: &'a [Scenario],
    controllers: &'a [Contender],
    zone: &'a ZoneParams,
    seed: Option<u64>,
    timing: bool,
}

#[derive(Debug, Serialize)]
struct ManifestFile<'a> {
    manifest_hash: String,
    #[serde(flatten)]
    manifest: Manifest<'a>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn write_csv_file(path: &Path, write: impl FnOnce(&mut Vec<u8>) -> Result<(), csv::Error>) -> Result<()> {
    let mut buf = Vec::new();
    write(&mut buf).with_context(|| format!("formatting {}", path.display()))?;
    write_file(path, buf)
}

fn write_logs(dir: &Path, logs: &[SimulationLog], suffix: &str, timing: bool) -> Result<()> {
    for log in logs {
        let name = format!("{}{suffix}.csv", log.controller);
        write_csv_file(&dir.join("logs").join(&name), |b| log.write_csv(b))?;
        write_csv_file(&dir.join("plans").join(&name), |b| log.write_plans_csv(b, timing))?;
    }
    Ok(())
}

fn score(set: &ReportSet, hash: Option<&str>) -> RadarScores {
    let mut scores = normalize(&set.scenario_id, &set.reports, &SCORED_KPIS, &KpiOrientation::default());
    scores.manifest_hash = hash.map(str::to_string);
    scores
}

fn format_ranking(scores: &RadarScores, ranking: &[RankEntry]) -> String {
    let width = ranking.iter().map(|r| r.controller.len()).max().unwrap_or(0).max(10);
    let mut out = format!("{:<4}  {:<width$}  {:>6}", "rank", "controller", "mean");
    for kpi in &scores.axes {
        let _ = write!(out, "  {:>w$}", kpi.name(), w = kpi.name().len());
    }
    out.push('\n');
    for entry in ranking {
        let c = scores
            .controllers
            .iter()
            .find(|c| c.controller == entry.controller)
            .expect("ranked controller");
        let mark = if entry.tied { "=" } else { " " };
        let _ = write!(
            out,
            "{:<3}{mark}  {:<width$}  {:>6.3}",
            entry.rank, entry.controller, entry.mean
        );
        for (kpi, s) in scores.axes.iter().zip(&c.scores) {
            let _ = write!(out, "  {:>w$.3}", s, w = kpi.name().len());
        }
        out.push('\n');
    }
    if ranking.iter().any(|r| r.tied) {
        out.push_str("(= tied mean, ordered by controller id)\n");
    }
    out
}

fn write_ranking(dir: &Path, scores: &RadarScores, ranking: &[RankEntry]) -> Result<()> {
    write_file(
        &dir.join("ranking.json"),
        serde_json::to_string_pretty(&(scores, ranking))? + "\n",
    )?;
    write_csv_file(&dir.join("ranking.csv"), |b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record(["rank", "controller", "mean", "tied"])?;
        for r in ranking {
            w.write_record([
                r.rank.to_string(),
                r.controller.clone(),
                r.mean.to_string(),
                r.tied.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    })
}

pub fn cmd_run(args: &RunArgs) -> Result<ExitCode> {
    let config = RunConfig::from_args(args)?;
    let resolved = config.resolve()?;

    let manifest = Manifest {
        software: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        source: &config.source,
        scenarios: &config.scenarios,
        controllers: &config.contenders,
        zone: &config.zone,
        seed: config.seed,
        timing: config.timing,
    };
    let hash = sha256_hex(serde_json::to_string(&manifest)?.as_bytes());

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .context("starting the worker pool")?;
    let results: Vec<_> = pool.install(|| {
        resolved
            .par_iter()
            .map(|r| run_matchup(r, &config.contenders))
            .collect()
    });

    fs::create_dir_all(&config.out).with_context(|| format!("creating {}", config.out.display()))?;
    let manifest_file = ManifestFile {
        manifest_hash: hash.clone(),
        manifest,
    };
    write_file(
        &config.out.join("manifest.json"),
        serde_json::to_string_pretty(&manifest_file)? + "\n",
    )?;

    let baseline = config
        .contenders
        .iter()
        .find(|c| c.config.is_reactive())
        .expect("checked contenders")
        .id
        .clone();
    let mut failures = Vec::new();
    let mut tables = Vec::new();
    for (r, result) in resolved.iter().zip(results) {
        let scenario = &r.scenario;
        let dir = config.out.join(&scenario.id);
        for sub in ["logs", "plans"] {
            fs::create_dir_all(dir.join(sub)).with_context(|| format!("creating {}", dir.display()))?;
        }
        let logs = match result {
            Ok(logs) => logs,
            Err(MatchupError::Episodes {
                completed,
                failures: failed,
            }) => {
                write_logs(&dir, &completed, "", config.timing)?;
                let partial: Vec<_> = failed.iter().map(|e| e.partial.clone()).collect();
                write_logs(&dir, &partial, ".partial", config.timing)?;
                failures.extend(failed.iter().map(|e| e.to_string()));
                continue;
            }
            Err(e) => {
                failures.push(format!("{}: {e}", scenario.id));
                continue;
            }
        };
        write_logs(&dir, &logs, "", config.timing)?;
        let set = build_report(&logs, &baseline, scenario, config.timing)?;
        write_file(&dir.join("report.json"), set.to_json() + "\n")?;
        write_csv_file(&dir.join("report.csv"), |b| set.write_csv(b))?;
        let scores = score(&set, Some(&hash));
        write_file(&dir.join("scores.json"), scores.to_json() + "\n")?;
        write_csv_file(&dir.join("scores.csv"), |b| scores.write_csv(b))?;
        if let Err(e) = emit_radar(&scores, &dir.join("radar.svg")) {
            failures.push(format!("{}: radar chart: {e}", scenario.id));
        }
        println!("scenario {}", scenario.id);
        print!("{}", format_ranking(&scores, &rank(&scores)));
        println!();
        tables.push(scores);
    }

    if tables.len() > 1 {
        let mut overall = aggregate(&tables)?;
        overall.manifest_hash = Some(hash.clone());
        let ranking = rank(&overall);
        println!("all scenarios ({})", tables.len());
        print!("{}", format_ranking(&overall, &ranking));
        write_ranking(&config.out, &overall, &ranking)?;
    }

    if failures.is_empty() {
        println!("wrote {} (manifest {})", config.out.display(), &hash[..12]);
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{} failure(s):", failures.len());
        for f in &failures {
            eprintln!("  {f}");
        }
        Ok(ExitCode::FAILURE)
    }
}

/// Report files named on the command line, with run directories expanded.
fn report_paths(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut paths = Vec::new();
    for input in inputs {
        if input.is_dir() {
            let direct = input.join("report.json");
            if direct.is_file() {
                paths.push(direct);
                continue;
            }
            let mut found: Vec<PathBuf> = fs::read_dir(input)
                .with_context(|| format!("listing {}", input.display()))?
                .filter_map(|e| e.ok().map(|e| e.path().join("report.json")))
                .filter(|p| p.is_file())
                .collect();
            if found.is_empty() {
                bail!("no report.json under {}", input.display());
            }
            found.sort();
            paths.extend(found);
        } else {
            paths.push(input.clone());
        }
    }
    Ok(paths)
}

pub fn cmd_rank(args: &RankArgs) -> Result<ExitCode> {
    let paths = report_paths(&args.reports)?;
    let mut tables = Vec::new();
    for path in &paths {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let set: ReportSet = serde_json::from_str(&text)
            .with_context(|| format!("{} is not a compatible report set", path.display()))?;
        tables.push(score(&set, None));
    }
    let overall = aggregate(&tables)?;
    let ranking = rank(&overall);
    print!("{}", format_ranking(&overall, &ranking));
    if let Some(out) = &args.out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        write_ranking(out, &overall, &ranking)?;
    }
    Ok(ExitCode::SUCCESS)
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<ExitCode> {
    let scenario = Scenario::load(&args.scenario)?;
    let mut diagnostics: Vec<String> = scenario.validate().iter().map(ToString::to_string).collect();
    if diagnostics.is_empty() {
        if let Err(e) = scenario.weather() {
            diagnostics.push(format!("dynamics.weather: {e}"));
        }
    }
    if diagnostics.is_empty() {
        println!("{}: scenario `{}` is valid", args.scenario.display(), scenario.id);
        return Ok(ExitCode::SUCCESS);
    }
    println!("{}: {} problem(s)", args.scenario.display(), diagnostics.len());
    for d in &diagnostics {
        println!("  {d}");
    }
    Ok(ExitCode::FAILURE)
}

pub fn cmd_weather_synth(args: &WeatherArgs) -> Result<ExitCode> {
    if args.days == 0 {
        bail!("--days must be at least 1");
    }
    for (flag, v) in [
        ("--amplitude", args.amplitude),
        ("--noise", args.noise),
        ("--solar-peak", args.solar_peak),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            bail!("{flag} must be a non-negative number, got {v}");
        }
    }
    let spec = SynthWeather {
        seed: args.seed,
        start: args.start,
        mean: args.mean,
        amplitude: args.amplitude,
        noise_std: args.noise,
        solar_peak: args.solar_peak,
    };
    let series = spec.generate(args.days);
    series.check()?;
    series.save(&args.out)?;
    println!("wrote {} hourly samples to {}", series.len(), args.out.display());
    Ok(ExitCode::SUCCESS)
}
