//! Planning objective and the total order both MPC planners select with.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{ControlError, Forecast};
use crate::emulator::{simulate_horizon, StepOutcome, Trajectory, ZoneParams, ZoneState};

const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveWeights {
    /// Cost per Wh of final energy.
    pub w_energy: f64,
    /// Cost per °C·h of comfort-band violation while occupied.
    pub w_comfort: f64,
    /// Cost per Wh drawn above the demand-response cap inside its window.
    pub w_flex: f64,
}

impl Default for ObjectiveWeights {
    fn default() -> Self {
        Self {
            w_energy: 0.001,
            w_comfort: 10.0,
            w_flex: 0.005,
        }
    }
}

impl ObjectiveWeights {
    pub fn validate(&self) -> Result<(), ControlError> {
        let all = [self.w_energy, self.w_comfort, self.w_flex];
        if all.iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(ControlError::Config(format!(
                "objective weights must be >= 0: {self:?}"
            )))
        }
    }
}

/// Score of one setpoint vector over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub cost: f64,
    /// Final energy, Wh.
    pub energy: f64,
    /// Degree-hours outside the comfort band while occupied, °C·h.
    pub discomfort: f64,
    /// Energy above the demand-response cap, Wh.
    pub flex_excess: f64,
    pub feasible: bool,
}

/// Running sums over the steps of a horizon. Both planners and
/// [`evaluate_strategy`] accumulate through this so that identical
/// trajectories always produce bit-identical evaluations.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub(crate) struct Accumulator {
    energy: f64,
    discomfort: f64,
    flex_excess: f64,
}

impl Accumulator {
    /// Add step `k`, which took the zone from `before` to `outcome.state`.
    pub(crate) fn push(mut self, k: usize, before: &ZoneState, outcome: &StepOutcome, forecast: &Forecast) -> Self {
        let hours = forecast.step / SECONDS_PER_HOUR;
        self.energy += outcome.final_energy;
        if forecast.boundaries[k].occupied {
            let band = &forecast.comfort_band;
            let dev = band.deviation(before.t_air) + band.deviation(outcome.state.t_air);
            self.discomfort += hours * dev / 2.0;
        }
        if let Some(cap) = forecast.dr_caps[k] {
            self.flex_excess += (outcome.final_energy - cap * hours).max(0.0);
        }
        self
    }

    pub(crate) fn finish(self, weights: &ObjectiveWeights) -> Evaluation {
        Evaluation {
            cost: weights.w_energy * self.energy
                + weights.w_comfort * self.discomfort
                + weights.w_flex * self.flex_excess,
            energy: self.energy,
            discomfort: self.discomfort,
            flex_excess: self.flex_excess,
            feasible: self.discomfort == 0.0,
        }
    }
}

/// Predict the horizon under `setpoints` and score it.
///
/// Discomfort integrates the band violation of the air temperature over the
/// occupied steps with the trapezoid rule, using the step's start and end
/// temperatures.
pub fn evaluate_strategy(
    setpoints: &[f64],
    state: ZoneState,
    forecast: &Forecast,
    params: &ZoneParams,
    weights: &ObjectiveWeights,
) -> Result<(Evaluation, Trajectory), ControlError> {
    if setpoints.len() != forecast.len() {
        return Err(ControlError::LengthMismatch {
            strategy: setpoints.len(),
            forecast: forecast.len(),
        });
    }
    let trajectory = simulate_horizon(state, setpoints, &forecast.boundaries, forecast.step, params)?;
    let mut acc = Accumulator::default();
    let mut before = state;
    for k in 0..trajectory.len() {
        let outcome = StepOutcome {
            state: trajectory.states[k],
            heat_delivered: trajectory.heat_delivered[k],
            final_energy: trajectory.final_energy[k],
        };
        acc = acc.push(k, &before, &outcome, forecast);
        before = outcome.state;
    }
    Ok((acc.finish(weights), trajectory))
}

/// Selection order shared by the planners; `Less` means `a` is preferred.
///
/// Feasible (zero-discomfort) vectors come first, ranked by cost and then
/// energy. Infeasible vectors are ranked by discomfort and then energy. Any
/// remaining tie goes to the lexicographically smaller setpoint vector, which
/// makes the order total and independent of enumeration order.
pub fn preference(a: &Evaluation, a_setpoints: &[f64], b: &Evaluation, b_setpoints: &[f64]) -> Ordering {
    b.feasible
        .cmp(&a.feasible)
        .then_with(|| {
            if a.feasible {
                a.cost.total_cmp(&b.cost)
            } else {
                a.discomfort.total_cmp(&b.discomfort)
            }
        })
        .then_with(|| a.energy.total_cmp(&b.energy))
        .then_with(|| lexicographic(a_setpoints, b_setpoints))
}

fn lexicographic(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}
