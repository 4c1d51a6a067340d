//! Two-node (air + envelope mass) RC thermal zone with a proportional heater.
//!
//! The same [`step`] function drives the plant during an episode and the
//! model-predictive planners' horizon predictions, so with no hidden
//! disturbance a planner's prediction is bit-identical to what the plant
//! later does.
//!
//! Integration is implicit Euler in increment form: the state update is
//! obtained from the net heat flows evaluated at the current state, so a
//! zone already in equilibrium with its boundary is returned unchanged
//! bit-for-bit. The heater law `clamp(k·(setpoint − t_air), 0, p_max)` is
//! evaluated implicitly as well: the unclamped solve is tried first and,
//! if the resulting power falls outside `[0, p_max]`, the step is re-solved
//! with the power pinned to the violated bound.

use serde::{Deserialize, Serialize};
use thiserror::Error;

mod params;

pub use params::ZoneParams;

/// Lowest temperature (°C) either node may reach before the run is declared diverged.
pub const PLAUSIBLE_MIN_C: f64 = -50.0;
/// Highest temperature (°C) either node may reach before the run is declared diverged.
pub const PLAUSIBLE_MAX_C: f64 = 80.0;

const SECONDS_PER_HOUR: f64 = 3600.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmulatorError {
    #[error("invalid zone parameter `{field}`: {reason}")]
    InvalidParams { field: &'static str, reason: String },
    #[error("time step {dt} s is not a positive multiple of the {substep} s substep")]
    InvalidTimestep { dt: f64, substep: f64 },
    #[error("simulation diverged: t_air = {t_air} °C, t_env = {t_env} °C")]
    Divergence { t_air: f64, t_env: f64 },
    #[error("horizon length mismatch: {setpoints} setpoints vs {boundaries} boundary samples")]
    LengthMismatch { setpoints: usize, boundaries: usize },
}

/// Thermal state of the zone.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneState {
    /// Air node temperature, °C.
    pub t_air: f64,
    /// Envelope mass node temperature, °C.
    pub t_env: f64,
}

impl ZoneState {
    pub fn new(t_air: f64, t_env: f64) -> Self {
        Self { t_air, t_env }
    }

    /// Both nodes at the same temperature.
    pub fn uniform(t: f64) -> Self {
        Self { t_air: t, t_env: t }
    }

    pub fn is_plausible(&self) -> bool {
        let ok = |t: f64| t.is_finite() && (PLAUSIBLE_MIN_C..=PLAUSIBLE_MAX_C).contains(&t);
        ok(self.t_air) && ok(self.t_env)
    }

    fn check(self) -> Result<Self, EmulatorError> {
        if self.is_plausible() {
            Ok(self)
        } else {
            Err(EmulatorError::Divergence {
                t_air: self.t_air,
                t_env: self.t_env,
            })
        }
    }
}

/// Boundary conditions acting on the zone during one control step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundarySample {
    /// Outdoor air temperature, °C.
    pub t_out: f64,
    /// Solar flux on the glazing after orientation and blind attenuation, W/m².
    pub solar: f64,
    /// Occupant and equipment heat, W.
    pub internal_gain: f64,
    pub occupied: bool,
    /// Unmeasured heat on the air node, W. Hidden from planners when a scenario enables it.
    pub disturbance: f64,
    /// Extra air-to-outdoor conductance from open windows, W/K.
    pub extra_conductance: f64,
}

impl BoundarySample {
    /// Outdoor temperature only: no sun, no gains, unoccupied.
    pub fn still(t_out: f64) -> Self {
        Self {
            t_out,
            solar: 0.0,
            internal_gain: 0.0,
            occupied: false,
            disturbance: 0.0,
            extra_conductance: 0.0,
        }
    }
}

/// Result of advancing the zone by one control step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: ZoneState,
    /// Heat delivered to the air node by the heater, Wh.
    pub heat_delivered: f64,
    /// Final (metered) energy consumed by the heater, Wh.
    pub final_energy: f64,
}

/// Heater power realizing `setpoint` from the given state, W.
pub fn local_heater_power(state: &ZoneState, setpoint: f64, params: &ZoneParams) -> f64 {
    (params.k_heater * (setpoint - state.t_air)).clamp(0.0, params.p_max)
}

/// Advance the zone by `dt` seconds holding `setpoint` and `boundary` constant.
pub fn step(
    state: ZoneState,
    boundary: &BoundarySample,
    setpoint: f64,
    dt: f64,
    params: &ZoneParams,
) -> Result<StepOutcome, EmulatorError> {
    let substeps = substep_count(dt, params.substep)?;
    let coeffs = Coefficients::new(boundary, params);

    let mut current = state;
    let mut heat_joules = 0.0;
    for _ in 0..substeps {
        let (next, power) = implicit_substep(current, setpoint, &coeffs, params);
        current = next.check()?;
        heat_joules += power * params.substep;
    }

    let final_energy = heat_joules / SECONDS_PER_HOUR / params.efficiency;
    Ok(StepOutcome {
        state: current,
        // Defined through final_energy so that final_energy · efficiency
        // reproduces it exactly.
        heat_delivered: final_energy * params.efficiency,
        final_energy,
    })
}

/// Predicted (or realized) course of the zone over a horizon.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    /// State at the end of each step.
    pub states: Vec<ZoneState>,
    /// Heater heat per step, Wh.
    pub heat_delivered: Vec<f64>,
    /// Final energy per step, Wh.
    pub final_energy: Vec<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn total_final_energy(&self) -> f64 {
        self.final_energy.iter().sum()
    }
}

/// Fold [`step`] over a sequence of setpoints and boundary samples.
pub fn simulate_horizon(
    state: ZoneState,
    setpoints: &[f64],
    boundaries: &[BoundarySample],
    dt: f64,
    params: &ZoneParams,
) -> Result<Trajectory, EmulatorError> {
    if setpoints.len() != boundaries.len() {
        return Err(EmulatorError::LengthMismatch {
            setpoints: setpoints.len(),
            boundaries: boundaries.len(),
        });
    }
    let mut trajectory = Trajectory {
        states: Vec::with_capacity(setpoints.len()),
        heat_delivered: Vec::with_capacity(setpoints.len()),
        final_energy: Vec::with_capacity(setpoints.len()),
    };
    let mut current = state;
    for (&setpoint, boundary) in setpoints.iter().zip(boundaries) {
        let outcome = step(current, boundary, setpoint, dt, params)?;
        current = outcome.state;
        trajectory.states.push(outcome.state);
        trajectory.heat_delivered.push(outcome.heat_delivered);
        trajectory.final_energy.push(outcome.final_energy);
    }
    Ok(trajectory)
}

/// Number of substeps in `dt`, or an error when `dt` is not a whole multiple.
pub fn substep_count(dt: f64, substep: f64) -> Result<usize, EmulatorError> {
    let bad = || EmulatorError::InvalidTimestep { dt, substep };
    if !(dt > 0.0) || !(substep > 0.0) {
        return Err(bad());
    }
    let ratio = dt / substep;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
        return Err(bad());
    }
    Ok(n as usize)
}

/// Conductances and source terms that stay fixed over one control step.
struct Coefficients {
    g_ie: f64,
    g_ea: f64,
    g_inf: f64,
    t_out: f64,
    /// Heat on the air node other than the heater, W.
    q_air: f64,
    /// Heat on the envelope node, W.
    q_env: f64,
}

impl Coefficients {
    fn new(boundary: &BoundarySample, params: &ZoneParams) -> Self {
        let solar_w = params.shgc * params.window_area * boundary.solar;
        Self {
            g_ie: 1.0 / params.r_ie,
            g_ea: 1.0 / params.r_ea,
            g_inf: 1.0 / params.r_inf + boundary.extra_conductance,
            t_out: boundary.t_out,
            q_air: boundary.internal_gain + boundary.disturbance + params.solar_split * solar_w,
            q_env: (1.0 - params.solar_split) * solar_w,
        }
    }
}

enum Heater {
    /// Power follows `k·(setpoint − t_air_next)`.
    Proportional,
    Fixed(f64),
}

fn implicit_substep(state: ZoneState, setpoint: f64, c: &Coefficients, params: &ZoneParams) -> (ZoneState, f64) {
    let next = solve_increment(state, setpoint, c, params, Heater::Proportional);
    let power = params.k_heater * (setpoint - next.t_air);
    if power < 0.0 {
        (solve_increment(state, setpoint, c, params, Heater::Fixed(0.0)), 0.0)
    } else if power > params.p_max {
        let pinned = solve_increment(state, setpoint, c, params, Heater::Fixed(params.p_max));
        (pinned, params.p_max)
    } else {
        (next, power)
    }
}

/// Solve the 2×2 implicit-Euler system for the state increment.
fn solve_increment(
    state: ZoneState,
    setpoint: f64,
    c: &Coefficients,
    params: &ZoneParams,
    heater: Heater,
) -> ZoneState {
    let h = params.substep;
    let (heater_flow, heater_gain) = match heater {
        Heater::Proportional => (params.k_heater * (setpoint - state.t_air), params.k_heater),
        Heater::Fixed(p) => (p, 0.0),
    };

    // Net flows at the current state.
    let flow_air = c.g_ie * (state.t_env - state.t_air) + c.g_inf * (c.t_out - state.t_air) + c.q_air + heater_flow;
    let flow_env = c.g_ie * (state.t_air - state.t_env) + c.g_ea * (c.t_out - state.t_env) + c.q_env;

    let a11 = params.c_air / h + c.g_ie + c.g_inf + heater_gain;
    let a22 = params.c_env / h + c.g_ie + c.g_ea;
    let a12 = c.g_ie;
    let det = a11 * a22 - a12 * a12;

    let d_air = (flow_air * a22 + a12 * flow_env) / det;
    let d_env = (a11 * flow_env + a12 * flow_air) / det;
    ZoneState {
        t_air: state.t_air + d_air,
        t_env: state.t_env + d_env,
    }
}
