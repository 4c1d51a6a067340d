use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use mpcbench_core::controllers::ControllerConfig;
use mpcbench_core::coupling::{check_contenders, Contender};
use mpcbench_core::emulator::ZoneParams;
use mpcbench_core::scenarios::{baseline_scenario, BatterySpec, Replanning, ResolvedScenario, Scenario};
use serde::Serialize;

use crate::RunArgs;

/// Where the scenarios of a run come from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScenarioSource {
    Baseline,
    File { path: PathBuf },
    Battery { path: PathBuf },
}

/// Everything a `run` needs, checked before anything is simulated or written.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub source: ScenarioSource,
    pub scenarios: Vec<Scenario>,
    pub contenders: Vec<Contender>,
    pub zone: ZoneParams,
    pub out: PathBuf,
    pub jobs: usize,
    pub seed: Option<u64>,
    pub timing: bool,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {what} {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {what} {}", path.display()))
}

fn parse_controller_list(list: &str) -> Result<Vec<Contender>> {
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|kind| match ControllerConfig::from_kind(kind) {
            Some(config) => Ok(Contender::new(kind, config)),
            None => bail!("unknown controller `{kind}` (expected reactive, combinatorial or ga)"),
        })
        .collect()
}

impl RunConfig {
    pub fn from_args(args: &RunArgs) -> Result<Self> {
        let (source, mut scenarios) = if let Some(path) = &args.battery {
            let spec: BatterySpec = read_json(path, "battery spec")?;
            let base = match &spec.base {
                Some(base) => {
                    let base = path.parent().map_or_else(|| base.clone(), |dir| dir.join(base));
                    Scenario::load(&base).with_context(|| format!("loading base scenario {}", base.display()))?
                }
                None => baseline_scenario(),
            };
            let battery = spec.generate(&base).context("generating the scenario battery")?;
            (ScenarioSource::Battery { path: path.clone() }, battery)
        } else if let Some(path) = &args.scenario {
            let scenario = Scenario::load(path).with_context(|| format!("loading scenario {}", path.display()))?;
            (ScenarioSource::File { path: path.clone() }, vec![scenario])
        } else {
            (ScenarioSource::Baseline, vec![baseline_scenario()])
        };
        if let Some(mode) = args.replanning {
            for s in &mut scenarios {
                s.replanning = mode.into();
            }
        }
        let mut ids: Vec<&str> = scenarios.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            bail!("scenario id `{}` appears twice", w[0]);
        }
        for s in &scenarios {
            ensure!(
                !s.id.is_empty() && !s.id.contains(['/', '\\']) && s.id != "." && s.id != "..",
                "scenario id `{}` cannot name an output directory",
                s.id
            );
        }

        let mut contenders = match &args.controller_config {
            Some(path) => read_json::<Vec<Contender>>(path, "controller config")?,
            None => parse_controller_list(&args.controllers)?,
        };
        if let Some(seed) = args.seed {
            for c in &mut contenders {
                if let ControllerConfig::Ga(ga) = &mut c.config {
                    ga.ga.seed = seed;
                }
            }
        }
        check_contenders(&contenders)?;
        for c in &contenders {
            ensure!(
                !c.id.is_empty() && !c.id.contains(['/', '\\', ',']),
                "controller id `{}` cannot name an output file",
                c.id
            );
        }

        let zone = match &args.zone {
            Some(path) => read_json::<ZoneParams>(path, "zone parameters")?,
            None => ZoneParams::default(),
        };
        zone.validate().context("invalid zone parameters")?;

        let out = args.out.clone();
        ensure!(!out.is_file(), "output path {} is a file", out.display());

        Ok(Self {
            source,
            scenarios,
            contenders,
            zone,
            out,
            jobs: args.jobs,
            seed: args.seed,
            timing: args.timing,
        })
    }

    /// Validate and expand every scenario; all problems are reported together.
    pub fn resolve(&self) -> Result<Vec<ResolvedScenario>> {
        let mut resolved = Vec::with_capacity(self.scenarios.len());
        let mut problems = Vec::new();
        for s in &self.scenarios {
            match s.resolve(&self.zone) {
                Ok(r) => resolved.push(r),
                Err(e) => problems.push(e.to_string()),
            }
        }
        if !problems.is_empty() {
            bail!("{}", problems.join("\n"));
        }
        Ok(resolved)
    }
}

/// Command-line spelling of [`Replanning`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ReplanningArg {
    Block,
    Receding,
}

impl From<ReplanningArg> for Replanning {
    fn from(r: ReplanningArg) -> Self {
        match r {
            ReplanningArg::Block => Replanning::Block,
            ReplanningArg::Receding => Replanning::Receding,
        }
    }
}
