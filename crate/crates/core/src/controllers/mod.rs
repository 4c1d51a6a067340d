//! Controllers under test: a reactive schedule follower and two predictive
//! planners (exhaustive combinatorial search and a genetic algorithm).
//!
//! Every controller answers the same question: given the zone state at the
//! start of a horizon and the forecast boundaries, which setpoint should be
//! imposed at each step of the horizon.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emulator::{BoundarySample, EmulatorError, Trajectory, ZoneParams, ZoneState};
use crate::scenarios::{ComfortBand, Scenario, SetpointBounds};

mod combinatorial;
mod ga;
mod objective;
mod reactive;

pub use combinatorial::{combinatorial_plan, CombinatorialConfig, DEFAULT_BUDGET};
pub use ga::{ga_plan, ga_search, GaConfig, GaOutcome, GaPlannerConfig, GRID_STEP};
pub use objective::{evaluate_strategy, preference, Evaluation, ObjectiveWeights};
pub use reactive::{reactive_decide, ReactiveSchedule};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ControlError {
    #[error(transparent)]
    Emulator(#[from] EmulatorError),
    #[error(
        "enumeration of {count} strategies exceeds the budget of {budget}; shrink the candidate set or the horizon"
    )]
    BudgetExceeded { count: u128, budget: u64 },
    #[error("strategy has {strategy} steps but the forecast has {forecast}")]
    LengthMismatch { strategy: usize, forecast: usize },
    #[error("invalid controller configuration: {0}")]
    Config(String),
}

/// Setpoints for each step of a horizon: the controller-to-emulator message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlStrategy {
    pub horizon_start: DateTime<Utc>,
    pub setpoints: Vec<f64>,
}

/// What a controller knows about the coming horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct Forecast {
    pub start: DateTime<Utc>,
    /// Control step, s.
    pub step: f64,
    /// Weather, gains and occupancy per step. Hidden disturbances are zero.
    pub boundaries: Vec<BoundarySample>,
    pub comfort_band: ComfortBand,
    /// Demand-response power cap per step, W.
    pub dr_caps: Vec<Option<f64>>,
}

impl Forecast {
    pub fn len(&self) -> usize {
        self.boundaries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boundaries.is_empty()
    }
}

/// Everything a planning call receives.
#[derive(Debug, Clone, Copy)]
pub struct PlanningInput<'a> {
    pub state: ZoneState,
    pub forecast: &'a Forecast,
    pub params: &'a ZoneParams,
    pub schedule: ReactiveSchedule,
    pub bounds: SetpointBounds,
}

impl<'a> PlanningInput<'a> {
    pub fn new(state: ZoneState, forecast: &'a Forecast, params: &'a ZoneParams, scenario: &Scenario) -> Self {
        Self {
            state,
            forecast,
            params,
            schedule: ReactiveSchedule {
                comfort_setpoint: scenario.comfort_setpoint,
                setback: scenario.setback,
            },
            bounds: scenario.setpoint_bounds,
        }
    }
}

/// A controller's answer plus bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub strategy: ControlStrategy,
    /// Objective evaluations performed to find the strategy.
    pub candidates_evaluated: u64,
    /// The planner's own prediction of the horizon under the chosen strategy.
    pub predicted: Option<Trajectory>,
    pub evaluation: Option<Evaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerConfig {
    Reactive,
    Combinatorial(CombinatorialConfig),
    Ga(GaPlannerConfig),
}

impl ControllerConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ControllerConfig::Reactive => "reactive",
            ControllerConfig::Combinatorial(_) => "combinatorial",
            ControllerConfig::Ga(_) => "ga",
        }
    }

    /// Default configuration for a controller kind name.
    pub fn from_kind(kind: &str) -> Option<Self> {
        match kind {
            "reactive" => Some(ControllerConfig::Reactive),
            "combinatorial" => Some(ControllerConfig::Combinatorial(Default::default())),
            "ga" => Some(ControllerConfig::Ga(Default::default())),
            _ => None,
        }
    }

    pub fn is_reactive(&self) -> bool {
        matches!(self, ControllerConfig::Reactive)
    }

    pub fn validate(&self) -> Result<(), ControlError> {
        match self {
            ControllerConfig::Reactive => Ok(()),
            ControllerConfig::Combinatorial(c) => c.validate(),
            ControllerConfig::Ga(g) => g.validate(),
        }
    }

    /// Plan the horizon described by `input`.
    pub fn plan(&self, input: &PlanningInput<'_>) -> Result<Plan, ControlError> {
        let forecast = input.forecast;
        match self {
            ControllerConfig::Reactive => {
                let occupied: Vec<bool> = forecast.boundaries.iter().map(|b| b.occupied).collect();
                let setpoints = (0..occupied.len())
                    .map(|k| reactive_decide(k, &occupied, &input.schedule))
                    .collect();
                Ok(Plan {
                    strategy: ControlStrategy {
                        horizon_start: forecast.start,
                        setpoints,
                    },
                    candidates_evaluated: 0,
                    predicted: None,
                    evaluation: None,
                })
            }
            ControllerConfig::Combinatorial(config) => {
                config.check_bounds(&input.bounds)?;
                combinatorial_plan(
                    input.state,
                    forecast,
                    &config.candidates,
                    forecast.len(),
                    input.params,
                    &config.weights,
                    config.budget,
                )
            }
            ControllerConfig::Ga(config) => ga_plan(
                input.state,
                forecast,
                input.bounds,
                forecast.len(),
                input.params,
                &config.weights,
                &config.ga,
            ),
        }
    }
}
