//! Lockstep coupling of one controller to the zone emulator.
//!
//! At each planning point the controller receives the zone state and a
//! forecast of the coming horizon (the plant's boundaries minus hidden
//! disturbances). Its strategy is applied step by step to the plant, with
//! occupant overrides taking precedence, and every step is logged.

use std::io::{Read, Write};
use std::time::Instant;

use chrono::{DateTime, Utc};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controllers::{ControlError, ControllerConfig, Forecast, PlanningInput};
use crate::emulator::{step, EmulatorError, ZoneState};
use crate::scenarios::{Replanning, ResolvedScenario};

#[derive(Debug, Error)]
pub enum CouplingError {
    #[error("planning call at step {step} failed: {source}")]
    Planner { step: usize, source: ControlError },
    #[error("controller returned {got} setpoints for a {expected}-step horizon at step {step}")]
    StrategyLength { step: usize, expected: usize, got: usize },
    #[error("plant simulation failed at step {step}: {source}")]
    Plant { step: usize, source: EmulatorError },
    #[error("invalid controller `{id}`: {source}")]
    Config { id: String, source: ControlError },
    #[error("matchup precondition: {0}")]
    Precondition(String),
    #[error("log csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One control step as it happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: usize,
    pub timestamp: DateTime<Utc>,
    /// Air temperature at the start of the step, °C.
    pub t_air_start_c: f64,
    /// Air temperature at the end of the step, °C.
    pub t_air_c: f64,
    /// Envelope temperature at the end of the step, °C.
    pub t_env_c: f64,
    /// Setpoint actually imposed on the plant, °C.
    pub setpoint_c: f64,
    /// True when an occupant override replaced the controller's setpoint.
    pub overridden: bool,
    pub heat_delivered_wh: f64,
    pub final_energy_wh: f64,
    pub occupied: bool,
    pub comfort_lower_c: f64,
    pub comfort_upper_c: f64,
    pub t_out_c: f64,
    pub solar_wm2: f64,
    pub dr_active: bool,
}

/// Bookkeeping of one planning call.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanRecord {
    /// Control step at which the plan starts.
    pub step: usize,
    pub horizon: usize,
    pub candidates_evaluated: u64,
    pub wall_time_s: f64,
    /// Planner's predicted zone states for the horizon, if it made a prediction.
    pub predicted: Option<Vec<ZoneState>>,
    /// Steps of this plan that were applied to the plant.
    pub applied: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationLog {
    pub scenario_id: String,
    pub controller: String,
    /// Control step, s.
    pub control_step: f64,
    pub rows: Vec<LogRow>,
    pub plans: Vec<PlanRecord>,
}

impl SimulationLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn planning_calls(&self) -> usize {
        self.plans.len()
    }

    pub fn candidates_evaluated(&self) -> u64 {
        self.plans.iter().map(|p| p.candidates_evaluated).sum()
    }

    /// Largest gap between a planner's predicted air temperature and the
    /// realized one over the applied, non-overridden steps. `None` when the
    /// controller made no predictions.
    pub fn prediction_gap(&self) -> Option<f64> {
        let mut gap: Option<f64> = None;
        for plan in &self.plans {
            let Some(predicted) = &plan.predicted else { continue };
            for (j, p) in predicted.iter().take(plan.applied).enumerate() {
                let row = &self.rows[plan.step + j];
                if row.overridden {
                    break;
                }
                let d = (p.t_air - row.t_air_c).abs().max((p.t_env - row.t_env_c).abs());
                gap = Some(gap.map_or(d, |g| g.max(d)));
            }
        }
        gap
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(writer);
        for row in &self.rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Per-call planner statistics. Wall time is left empty unless `timing`.
    pub fn write_plans_csv<W: Write>(&self, writer: W, timing: bool) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["call", "step", "horizon", "candidates_evaluated", "wall_time_s"])?;
        for (i, p) in self.plans.iter().enumerate() {
            out.write_record([
                i.to_string(),
                p.step.to_string(),
                p.horizon.to_string(),
                p.candidates_evaluated.to_string(),
                if timing {
                    p.wall_time_s.to_string()
                } else {
                    String::new()
                },
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Parse the rows written by [`SimulationLog::write_csv`].
pub fn read_log_rows<R: Read>(reader: R) -> Result<Vec<LogRow>, csv::Error> {
    csv::Reader::from_reader(reader).deserialize().collect()
}

/// An episode that stopped early, with everything logged up to the failure.
#[derive(Debug, Error)]
#[error("{controller} on {scenario_id}: {source} ({} of {} steps logged)", partial.len(), duration)]
pub struct EpisodeError {
    pub scenario_id: String,
    pub controller: String,
    pub duration: usize,
    pub partial: SimulationLog,
    #[source]
    pub source: CouplingError,
}

/// Run one controller over the full scenario, starting from setback equilibrium.
pub fn run_episode(
    resolved: &ResolvedScenario,
    controller_id: &str,
    controller: &ControllerConfig,
) -> Result<SimulationLog, Box<EpisodeError>> {
    let scenario = &resolved.scenario;
    let params = &resolved.params;
    let n = resolved.len();
    let dt = scenario.control_step;
    let horizon = scenario.horizon.max(1);

    let mut log = SimulationLog {
        scenario_id: scenario.id.clone(),
        controller: controller_id.to_string(),
        control_step: dt,
        rows: Vec::with_capacity(n),
        plans: Vec::new(),
    };
    let fail = |log: SimulationLog, source: CouplingError| {
        Box::new(EpisodeError {
            scenario_id: scenario.id.clone(),
            controller: controller_id.to_string(),
            duration: n,
            partial: log,
            source,
        })
    };

    let mut state = ZoneState::uniform(scenario.setback);
    let mut strategy: Vec<f64> = Vec::new();
    let mut strategy_start = 0;
    for k in 0..n {
        let replan = match scenario.replanning {
            Replanning::Block => k - strategy_start >= strategy.len(),
            Replanning::Receding => true,
        };
        if replan {
            let h = horizon.min(n - k);
            let forecast = Forecast {
                start: resolved.timestamps[k],
                step: dt,
                boundaries: resolved.predicted[k..k + h].to_vec(),
                comfort_band: scenario.comfort_band,
                dr_caps: resolved.dr_caps[k..k + h].to_vec(),
            };
            let input = PlanningInput::new(state, &forecast, params, scenario);
            let started = Instant::now();
            let plan = match controller.plan(&input) {
                Ok(plan) => plan,
                Err(source) => return Err(fail(log, CouplingError::Planner { step: k, source })),
            };
            let wall_time_s = started.elapsed().as_secs_f64();
            if plan.strategy.setpoints.len() != h {
                let got = plan.strategy.setpoints.len();
                return Err(fail(
                    log,
                    CouplingError::StrategyLength {
                        step: k,
                        expected: h,
                        got,
                    },
                ));
            }
            log.plans.push(PlanRecord {
                step: k,
                horizon: h,
                candidates_evaluated: plan.candidates_evaluated,
                wall_time_s,
                predicted: plan.predicted.map(|t| t.states),
                applied: 0,
            });
            strategy = plan.strategy.setpoints;
            strategy_start = k;
        }

        let commanded = strategy[k - strategy_start];
        let (setpoint, overridden) = match resolved.overrides[k] {
            Some(o) => (o, true),
            None => (commanded, false),
        };
        let boundary = &resolved.plant[k];
        let outcome = match step(state, boundary, setpoint, dt, params) {
            Ok(outcome) => outcome,
            Err(source) => return Err(fail(log, CouplingError::Plant { step: k, source })),
        };
        if let Some(plan) = log.plans.last_mut() {
            plan.applied += 1;
        }
        log.rows.push(LogRow {
            step: k,
            timestamp: resolved.timestamps[k],
            t_air_start_c: state.t_air,
            t_air_c: outcome.state.t_air,
            t_env_c: outcome.state.t_env,
            setpoint_c: setpoint,
            overridden,
            heat_delivered_wh: outcome.heat_delivered,
            final_energy_wh: outcome.final_energy,
            occupied: boundary.occupied,
            comfort_lower_c: scenario.comfort_band.lower,
            comfort_upper_c: scenario.comfort_band.upper,
            t_out_c: boundary.t_out,
            solar_wm2: boundary.solar,
            dr_active: resolved.dr_caps[k].is_some(),
        });
        state = outcome.state;
    }
    Ok(log)
}

/// A controller entered in a matchup under a unique id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contender {
    pub id: String,
    pub config: ControllerConfig,
}

impl Contender {
    pub fn new(id: impl Into<String>, config: ControllerConfig) -> Self {
        Self { id: id.into(), config }
    }
}

/// Check that a controller list can form a matchup.
pub fn check_contenders(contenders: &[Contender]) -> Result<(), CouplingError> {
    if !contenders.iter().any(|c| c.config.is_reactive()) {
        return Err(CouplingError::Precondition(
            "the reactive controller must be included; it is the baseline of every savings KPI".into(),
        ));
    }
    for (i, c) in contenders.iter().enumerate() {
        if contenders[..i].iter().any(|o| o.id == c.id) {
            return Err(CouplingError::Precondition(format!(
                "controller id `{}` is used twice",
                c.id
            )));
        }
        c.config.validate().map_err(|source| CouplingError::Config {
            id: c.id.clone(),
            source,
        })?;
    }
    Ok(())
}

#[derive(Debug, Error)]
pub enum MatchupError {
    #[error(transparent)]
    Precondition(CouplingError),
    #[error("{} of {} episodes failed", failures.len(), failures.len() + completed.len())]
    Episodes {
        completed: Vec<SimulationLog>,
        failures: Vec<EpisodeError>,
    },
}

/// Run every contender on an identical fresh episode, in parallel. Logs come
/// back in contender order. A failing episode does not stop the others.
pub fn run_matchup(resolved: &ResolvedScenario, contenders: &[Contender]) -> Result<Vec<SimulationLog>, MatchupError> {
    check_contenders(contenders).map_err(MatchupError::Precondition)?;
    let results: Vec<_> = contenders
        .par_iter()
        .map(|c| run_episode(resolved, &c.id, &c.config))
        .collect();
    let mut completed = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(log) => completed.push(log),
            Err(e) => failures.push(*e),
        }
    }
    if failures.is_empty() {
        Ok(completed)
    } else {
        Err(MatchupError::Episodes { completed, failures })
    }
}
