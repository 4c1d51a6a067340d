//! Exhaustive search over a discrete setpoint grid.
//!
//! All `K^H` setpoint vectors are scored. The search walks the tree of
//! prefixes depth first so that a prefix's simulation is shared by every
//! vector extending it; each leaf still receives a full evaluation. The
//! first level of the tree is split across threads and the per-branch
//! winners are merged with [`preference`], a total order, so the result does
//! not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::objective::Accumulator;
use super::{preference, ControlError, ControlStrategy, Evaluation, Forecast, ObjectiveWeights, Plan};
use crate::emulator::{simulate_horizon, step, ZoneParams, ZoneState};
use crate::scenarios::SetpointBounds;

pub const DEFAULT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CombinatorialConfig {
    /// Setpoint levels tried at every step, °C.
    pub candidates: Vec<f64>,
    /// Largest number of vectors an enumeration may score.
    pub budget: u64,
    pub weights: ObjectiveWeights,
}

impl Default for CombinatorialConfig {
    fn default() -> Self {
        Self {
            candidates: vec![16.0, 20.0, 20.5, 21.0, 22.0, 24.0],
            budget: DEFAULT_BUDGET,
            weights: ObjectiveWeights::default(),
        }
    }
}

impl CombinatorialConfig {
    pub fn validate(&self) -> Result<(), ControlError> {
        if self.candidates.is_empty() {
            return Err(ControlError::Config("candidate set is empty".into()));
        }
        if self.candidates.iter().any(|c| !c.is_finite()) {
            return Err(ControlError::Config("candidates must be finite".into()));
        }
        self.weights.validate()
    }

    pub(crate) fn check_bounds(&self, bounds: &SetpointBounds) -> Result<(), ControlError> {
        match self.candidates.iter().find(|c| **c < bounds.min || **c > bounds.max) {
            Some(c) => Err(ControlError::Config(format!(
                "candidate {c} °C lies outside the setpoint bounds [{}, {}]",
                bounds.min, bounds.max
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
struct Best {
    setpoints: Vec<f64>,
    evaluation: Evaluation,
}

impl Best {
    fn pick(self, other: Self) -> Self {
        if preference(&other.evaluation, &other.setpoints, &self.evaluation, &self.setpoints).is_lt() {
            other
        } else {
            self
        }
    }
}

struct Search<'a> {
    forecast: &'a Forecast,
    candidates: &'a [f64],
    params: &'a ZoneParams,
    weights: &'a ObjectiveWeights,
    horizon: usize,
}

impl Search<'_> {
    fn descend(
        &self,
        state: ZoneState,
        acc: Accumulator,
        prefix: &mut Vec<f64>,
        best: &mut Option<Best>,
    ) -> Result<(), ControlError> {
        let k = prefix.len();
        if k == self.horizon {
            let candidate = Best {
                setpoints: prefix.clone(),
                evaluation: acc.finish(self.weights),
            };
            *best = Some(match best.take() {
                Some(b) => b.pick(candidate),
                None => candidate,
            });
            return Ok(());
        }
        for &setpoint in self.candidates {
            let outcome = step(
                state,
                &self.forecast.boundaries[k],
                setpoint,
                self.forecast.step,
                self.params,
            )?;
            let next = acc.push(k, &state, &outcome, self.forecast);
            prefix.push(setpoint);
            self.descend(outcome.state, next, prefix, best)?;
            prefix.pop();
        }
        Ok(())
    }
}

/// Score every vector in `candidates^horizon` and return the preferred one.
///
/// Among vectors that keep the zone inside the comfort band during
/// occupancy, the cheapest wins (with no demand-response window in the
/// horizon, the one using least energy). When none does, the vector with the
/// least discomfort wins, then the one using least energy. Remaining ties go
/// to the lexicographically smallest vector.
pub fn combinatorial_plan(
    state: ZoneState,
    forecast: &Forecast,
    candidates: &[f64],
    horizon: usize,
    params: &ZoneParams,
    weights: &ObjectiveWeights,
    budget: u64,
) -> Result<Plan, ControlError> {
    if candidates.is_empty() {
        return Err(ControlError::Config("candidate set is empty".into()));
    }
    if horizon != forecast.len() {
        return Err(ControlError::LengthMismatch {
            strategy: horizon,
            forecast: forecast.len(),
        });
    }
    let count = (candidates.len() as u128).saturating_pow(horizon as u32);
    if count > budget as u128 {
        return Err(ControlError::BudgetExceeded { count, budget });
    }

    let search = Search {
        forecast,
        candidates,
        params,
        weights,
        horizon,
    };
    let best = if horizon == 0 {
        Best {
            setpoints: Vec::new(),
            evaluation: Accumulator::default().finish(weights),
        }
    } else {
        let branches: Vec<Best> = candidates
            .par_iter()
            .map(|&first| {
                let outcome = step(state, &forecast.boundaries[0], first, forecast.step, params)?;
                let acc = Accumulator::default().push(0, &state, &outcome, forecast);
                let mut prefix = Vec::with_capacity(horizon);
                prefix.push(first);
                let mut best = None;
                search.descend(outcome.state, acc, &mut prefix, &mut best)?;
                Ok(best.expect("non-empty candidate set"))
            })
            .collect::<Result<_, ControlError>>()?;
        branches
            .into_iter()
            .reduce(Best::pick)
            .expect("non-empty candidate set")
    };

    let predicted = simulate_horizon(state, &best.setpoints, &forecast.boundaries, forecast.step, params)?;
    Ok(Plan {
        strategy: ControlStrategy {
            horizon_start: forecast.start,
            setpoints: best.setpoints,
        },
        candidates_evaluated: count as u64,
        predicted: Some(predicted),
        evaluation: Some(best.evaluation),
    })
}
