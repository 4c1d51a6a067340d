//! Test scenarios: static building variables, dynamic profiles and test timing.
//!
//! A [`Scenario`] is the declarative description read from and written to
//! JSON files. [`Scenario::resolve`] turns it into the per-step boundary
//! series the coupling loop consumes.
//!
//! Static variables that a two-node zone cannot express directly (floor
//! position, insulation placement, share of external facade) are folded
//! into the four scale knobs of [`StaticVars`]; the mapping is lossy.

use std::fmt;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Datelike, Timelike, Utc, Weekday};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emulator::{BoundarySample, ZoneParams};

mod battery;
mod tariff;
mod weather;

pub use battery::{generate_battery, BatteryMode, BatterySpec};
pub use tariff::{first_uncovered_hour, DailyPeriod, PeFactor, Tariff};
pub use weather::{load_weather, read_weather, synth_weather, SynthWeather, WeatherSeries};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("row {row}: {message}")]
    Gap { row: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("weather: {0}")]
    Weather(String),
    #[error("unknown scenario field `{0}`")]
    UnknownField(String),
    #[error("variation of `{field}` produced an unusable scenario: {message}")]
    InvalidVariation { field: String, message: String },
    #[error("scenario `{id}` is invalid: {}", join_diagnostics(.diagnostics))]
    Invalid { id: String, diagnostics: Vec<Diagnostic> },
}

impl ScenarioError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

fn join_diagnostics(diagnostics: &[Diagnostic]) -> String {
    diagnostics
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}

/// One violated scenario invariant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    North,
    East,
    South,
    West,
}

impl Orientation {
    /// Scale applied to the (south-referenced) solar flux.
    pub fn solar_factor(self) -> f64 {
        match self {
            Orientation::South => 1.0,
            Orientation::East | Orientation::West => 0.7,
            Orientation::North => 0.35,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuildingType {
    Office,
    Residential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StaticVars {
    /// Multiplier on the envelope resistances; above 1 means better insulation.
    pub envelope_scale: f64,
    /// Multiplier on the envelope heat capacity.
    pub inertia_scale: f64,
    /// Window-to-wall ratio.
    pub wwr: f64,
    /// External facade area the ratio applies to, m².
    pub facade_area: f64,
    pub orientation: Orientation,
    /// Heater efficiency (delivered heat per final energy).
    pub efficiency: f64,
    pub building_type: BuildingType,
}

impl Default for StaticVars {
    fn default() -> Self {
        Self {
            envelope_scale: 1.0,
            inertia_scale: 1.0,
            wwr: 0.3,
            facade_area: 20.0,
            orientation: Orientation::South,
            efficiency: 0.95,
            building_type: BuildingType::Office,
        }
    }
}

/// Hours of the day, repeated on the listed weekdays.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeeklySchedule {
    pub days: Vec<Weekday>,
    /// `[start_hour, end_hour)` intervals, no wrap past midnight.
    pub periods: Vec<(u32, u32)>,
    pub headcount: u32,
}

impl WeeklySchedule {
    pub fn office() -> Self {
        use Weekday::*;
        Self {
            days: vec![Mon, Tue, Wed, Thu, Fri],
            periods: vec![(8, 18)],
            headcount: 3,
        }
    }

    pub fn residential() -> Self {
        use Weekday::*;
        Self {
            days: vec![Mon, Tue, Wed, Thu, Fri, Sat, Sun],
            periods: vec![(6, 8), (17, 23)],
            headcount: 2,
        }
    }

    pub fn is_occupied(&self, ts: DateTime<Utc>) -> bool {
        let hour = ts.hour();
        self.days.contains(&ts.weekday()) && self.periods.iter().any(|&(start, end)| start <= hour && hour < end)
    }
}

/// Internal heat model: people plus equipment while occupied, a base load otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainModel {
    pub per_person_w: f64,
    pub equipment_w: f64,
    pub base_w: f64,
}

impl GainModel {
    pub fn office() -> Self {
        Self {
            per_person_w: 80.0,
            equipment_w: 150.0,
            base_w: 50.0,
        }
    }

    pub fn residential() -> Self {
        Self {
            per_person_w: 70.0,
            equipment_w: 100.0,
            base_w: 80.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowOpening {
    pub start_step: usize,
    pub duration_steps: usize,
    /// Extra air-to-outdoor conductance while open, W/K.
    pub extra_conductance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetpointOverride {
    pub start_step: usize,
    pub duration_steps: usize,
    pub setpoint: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeatherSource {
    Synthetic(SynthWeather),
    File { path: PathBuf },
    Series(WeatherSeries),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicVars {
    pub occupancy: WeeklySchedule,
    pub internal_gains: GainModel,
    #[serde(default)]
    pub window_openings: Vec<WindowOpening>,
    /// Solar attenuation per hour of day (24 values in [0, 1]); empty means no blinds.
    #[serde(default)]
    pub blind_schedule: Vec<f64>,
    #[serde(default)]
    pub setpoint_overrides: Vec<SetpointOverride>,
    /// Unmeasured heat on the air node per step, W; empty means none.
    #[serde(default)]
    pub disturbance_profile: Vec<f64>,
    pub weather: WeatherSource,
}

impl DynamicVars {
    pub fn for_building(building_type: BuildingType, weather: WeatherSource) -> Self {
        let (occupancy, internal_gains) = match building_type {
            BuildingType::Office => (WeeklySchedule::office(), GainModel::office()),
            BuildingType::Residential => (WeeklySchedule::residential(), GainModel::residential()),
        };
        Self {
            occupancy,
            internal_gains,
            window_openings: Vec::new(),
            blind_schedule: Vec::new(),
            setpoint_overrides: Vec::new(),
            disturbance_profile: Vec::new(),
            weather,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComfortBand {
    pub lower: f64,
    pub upper: f64,
}

impl ComfortBand {
    /// Distance outside the band, 0 inside.
    pub fn deviation(&self, t: f64) -> f64 {
        (self.lower - t).max(0.0) + (t - self.upper).max(0.0)
    }

    pub fn contains(&self, t: f64) -> bool {
        self.deviation(t) == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetpointBounds {
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Replanning {
    /// Apply the whole horizon, then plan again.
    Block,
    /// Apply the first step only and plan every step.
    Receding,
}

/// Demand-response request: keep grid power under `power_cap_w` during the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrEvent {
    pub start_step: usize,
    pub duration_steps: usize,
    pub power_cap_w: f64,
}

impl DrEvent {
    pub fn contains(&self, step: usize) -> bool {
        step >= self.start_step && step < self.start_step + self.duration_steps
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub statics: StaticVars,
    pub dynamics: DynamicVars,
    pub comfort_band: ComfortBand,
    /// Setpoint the reactive controller holds while occupied, °C.
    pub comfort_setpoint: f64,
    pub setback: f64,
    pub setpoint_bounds: SetpointBounds,
    /// Test length in control steps.
    pub duration: usize,
    /// Control step, s.
    pub control_step: f64,
    /// Prediction horizon in control steps.
    pub horizon: usize,
    pub replanning: Replanning,
    #[serde(default)]
    pub dr_events: Vec<DrEvent>,
    pub tariff: Tariff,
    pub pe_factor: PeFactor,
    /// Learning period preceding the test, in steps. Carried for protocol
    /// completeness; the built-in controllers need no training.
    #[serde(default)]
    pub training_period: Option<usize>,
}

/// Heating-season office week: 168 hourly steps, 6 h horizon, block replanning.
pub fn baseline_scenario() -> Scenario {
    let statics = StaticVars::default();
    let weather = WeatherSource::Synthetic(SynthWeather::winter(1));
    Scenario {
        id: "baseline".into(),
        dynamics: DynamicVars::for_building(statics.building_type, weather),
        statics,
        comfort_band: ComfortBand {
            lower: 20.0,
            upper: 24.0,
        },
        comfort_setpoint: 21.0,
        setback: 16.0,
        setpoint_bounds: SetpointBounds { min: 16.0, max: 24.0 },
        duration: 168,
        control_step: 3600.0,
        horizon: 6,
        replanning: Replanning::Block,
        // Wednesday 08:00-11:00.
        dr_events: vec![DrEvent {
            start_step: 2 * 24 + 8,
            duration_steps: 3,
            power_cap_w: 1500.0,
        }],
        tariff: Tariff::Flat { price_per_kwh: 0.2 },
        pe_factor: PeFactor::Constant { factor: 2.3 },
        training_period: None,
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ScenarioError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    /// Read a scenario file; a relative weather file path is taken relative to it.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|e| ScenarioError::io(path, e))?;
        let mut scenario = Self::from_json(&text)?;
        if let WeatherSource::File { path: weather } = &mut scenario.dynamics.weather {
            if weather.is_relative() {
                if let Some(dir) = path.parent() {
                    *weather = dir.join(&*weather);
                }
            }
        }
        Ok(scenario)
    }

    /// Number of planning calls an episode makes.
    pub fn planning_calls(&self) -> usize {
        match self.replanning {
            Replanning::Block => self.duration.div_ceil(self.horizon.max(1)),
            Replanning::Receding => self.duration,
        }
    }

    /// Every violated invariant, not only the first.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut check = |ok: bool, field: &str, message: String| {
            if !ok {
                out.push(Diagnostic::new(field, message));
            }
        };

        check(!self.id.is_empty(), "id", "must not be empty".into());
        check(self.duration >= 1, "duration", "must be at least one step".into());
        check(self.horizon >= 1, "horizon", "must be at least one step".into());
        check(
            self.control_step.is_finite() && self.control_step > 0.0,
            "control_step",
            format!("must be > 0 s, got {}", self.control_step),
        );
        if self.replanning == Replanning::Block && self.horizon >= 1 {
            check(
                self.duration.is_multiple_of(self.horizon),
                "duration",
                format!(
                    "block replanning needs duration ({}) to be a multiple of horizon ({})",
                    self.duration, self.horizon
                ),
            );
        }

        let band = self.comfort_band;
        check(
            band.lower < band.upper,
            "comfort_band",
            format!("lower ({}) must be below upper ({})", band.lower, band.upper),
        );
        let bounds = self.setpoint_bounds;
        check(
            bounds.min < bounds.max,
            "setpoint_bounds",
            format!("min ({}) must be below max ({})", bounds.min, bounds.max),
        );
        let within = |t: f64| t.is_finite() && t >= bounds.min && t <= bounds.max;
        check(
            within(self.setback),
            "setback",
            format!("{} lies outside the setpoint bounds", self.setback),
        );
        check(
            within(self.comfort_setpoint),
            "comfort_setpoint",
            format!("{} lies outside the setpoint bounds", self.comfort_setpoint),
        );

        let s = &self.statics;
        for (field, value) in [
            ("statics.envelope_scale", s.envelope_scale),
            ("statics.inertia_scale", s.inertia_scale),
            ("statics.efficiency", s.efficiency),
        ] {
            check(
                value.is_finite() && value > 0.0,
                field,
                format!("must be > 0, got {value}"),
            );
        }
        check(
            (0.0..=1.0).contains(&s.wwr),
            "statics.wwr",
            format!("must lie in [0, 1], got {}", s.wwr),
        );
        check(
            s.facade_area.is_finite() && s.facade_area >= 0.0,
            "statics.facade_area",
            format!("must be >= 0, got {}", s.facade_area),
        );

        let d = &self.dynamics;
        check(
            !d.occupancy.periods.iter().any(|&(a, b)| a >= b || b > 24),
            "dynamics.occupancy.periods",
            "each period needs start < end <= 24".into(),
        );
        let g = &d.internal_gains;
        check(
            [g.per_person_w, g.equipment_w, g.base_w].iter().all(|v| *v >= 0.0),
            "dynamics.internal_gains",
            "gains must be >= 0".into(),
        );
        if !d.blind_schedule.is_empty() {
            check(
                d.blind_schedule.len() == 24,
                "dynamics.blind_schedule",
                format!("needs 24 hourly factors, got {}", d.blind_schedule.len()),
            );
            check(
                d.blind_schedule.iter().all(|f| (0.0..=1.0).contains(f)),
                "dynamics.blind_schedule",
                "attenuation factors must lie in [0, 1]".into(),
            );
        }
        if !d.disturbance_profile.is_empty() {
            check(
                d.disturbance_profile.len() >= self.duration,
                "dynamics.disturbance_profile",
                format!(
                    "covers {} steps, test lasts {}",
                    d.disturbance_profile.len(),
                    self.duration
                ),
            );
        }
        for (i, w) in d.window_openings.iter().enumerate() {
            check(
                w.start_step + w.duration_steps <= self.duration && w.extra_conductance >= 0.0,
                "dynamics.window_openings",
                format!("opening {i} must lie within the test and have conductance >= 0"),
            );
        }
        for (i, o) in d.setpoint_overrides.iter().enumerate() {
            check(
                o.start_step + o.duration_steps <= self.duration && o.setpoint.is_finite(),
                "dynamics.setpoint_overrides",
                format!("override {i} must lie within the test with a finite setpoint"),
            );
        }
        match &d.weather {
            WeatherSource::Synthetic(w) => {
                check(
                    w.noise_std >= 0.0 && w.solar_peak >= 0.0,
                    "dynamics.weather",
                    "noise_std and solar_peak must be >= 0".into(),
                );
                check(
                    self.control_step == 3600.0,
                    "dynamics.weather",
                    "synthetic weather is hourly; control_step must be 3600 s".into(),
                );
            }
            WeatherSource::Series(w) => {
                if let Err(e) = w.check() {
                    check(false, "dynamics.weather", e.to_string());
                }
            }
            WeatherSource::File { .. } => {}
        }

        for (i, e) in self.dr_events.iter().enumerate() {
            check(
                e.duration_steps >= 1 && e.start_step + e.duration_steps <= self.duration && e.power_cap_w >= 0.0,
                "dr_events",
                format!("event {i} must be non-empty, inside the test, with cap >= 0"),
            );
        }

        match &self.tariff {
            Tariff::TimeOfUse { periods } => {
                if let Some(h) = first_uncovered_hour(periods) {
                    check(false, "tariff", format!("no price for hour {h}"));
                }
            }
            Tariff::Flat { .. } => {}
        }
        check(
            self.tariff.values().iter().all(|p| p.is_finite() && *p >= 0.0),
            "tariff",
            "prices must be >= 0".into(),
        );
        if let PeFactor::Periods { periods } = &self.pe_factor {
            if let Some(h) = first_uncovered_hour(periods) {
                check(false, "pe_factor", format!("no factor for hour {h}"));
            }
        }
        check(
            self.pe_factor.values().iter().all(|f| f.is_finite() && *f > 0.0),
            "pe_factor",
            "factors must be > 0".into(),
        );
        out
    }

    /// Zone parameters with this scenario's static variables applied to `base`.
    pub fn zone_params(&self, base: &ZoneParams) -> ZoneParams {
        let s = &self.statics;
        ZoneParams {
            r_ie: base.r_ie * s.envelope_scale,
            r_ea: base.r_ea * s.envelope_scale,
            c_env: base.c_env * s.inertia_scale,
            window_area: s.wwr * s.facade_area,
            efficiency: s.efficiency,
            ..base.clone()
        }
    }

    pub fn weather(&self) -> Result<WeatherSeries, ScenarioError> {
        let series = match &self.dynamics.weather {
            WeatherSource::Synthetic(spec) => {
                let hours = (self.duration as f64 * self.control_step / 3600.0).ceil() as usize;
                spec.generate(hours.div_ceil(24).max(1))
            }
            WeatherSource::File { path } => load_weather(path)?,
            WeatherSource::Series(series) => series.clone(),
        };
        series.check()?;
        if series.step != self.control_step {
            return Err(ScenarioError::Weather(format!(
                "weather step {} s differs from control step {} s",
                series.step, self.control_step
            )));
        }
        if series.len() < self.duration {
            return Err(ScenarioError::Weather(format!(
                "weather covers {} steps, test lasts {}",
                series.len(),
                self.duration
            )));
        }
        Ok(series)
    }

    /// Validate, load weather, and expand every per-step series.
    pub fn resolve(&self, base: &ZoneParams) -> Result<ResolvedScenario, ScenarioError> {
        let diagnostics = self.validate();
        if !diagnostics.is_empty() {
            return Err(ScenarioError::Invalid {
                id: self.id.clone(),
                diagnostics,
            });
        }
        let params = self.zone_params(base);
        params.validate().map_err(|e| ScenarioError::Invalid {
            id: self.id.clone(),
            diagnostics: vec![Diagnostic::new("zone", e.to_string())],
        })?;
        let weather = self.weather()?;
        let d = &self.dynamics;
        let n = self.duration;

        let timestamps: Vec<_> = (0..n).map(|k| weather.timestamp(k)).collect();
        let mut plant = Vec::with_capacity(n);
        for (k, &ts) in timestamps.iter().enumerate() {
            let occupied = d.occupancy.is_occupied(ts);
            let gains = &d.internal_gains;
            let internal_gain = if occupied {
                gains.per_person_w * d.occupancy.headcount as f64 + gains.equipment_w
            } else {
                gains.base_w
            };
            let blind = if d.blind_schedule.is_empty() {
                1.0
            } else {
                d.blind_schedule[ts.hour() as usize]
            };
            let extra_conductance = d
                .window_openings
                .iter()
                .filter(|w| k >= w.start_step && k < w.start_step + w.duration_steps)
                .map(|w| w.extra_conductance)
                .sum();
            plant.push(BoundarySample {
                t_out: weather.t_out[k],
                solar: weather.solar[k] * self.statics.orientation.solar_factor() * blind,
                internal_gain,
                occupied,
                disturbance: d.disturbance_profile.get(k).copied().unwrap_or(0.0),
                extra_conductance,
            });
        }
        let predicted = plant
            .iter()
            .map(|b| BoundarySample { disturbance: 0.0, ..*b })
            .collect();

        let mut overrides = vec![None; n];
        for o in &d.setpoint_overrides {
            for slot in overrides.iter_mut().skip(o.start_step).take(o.duration_steps) {
                *slot = Some(o.setpoint);
            }
        }
        let dr_caps = (0..n)
            .map(|k| {
                self.dr_events
                    .iter()
                    .filter(|e| e.contains(k))
                    .map(|e| e.power_cap_w)
                    .reduce(f64::min)
            })
            .collect();

        Ok(ResolvedScenario {
            scenario: self.clone(),
            params,
            timestamps,
            plant,
            predicted,
            overrides,
            dr_caps,
        })
    }
}

/// A scenario expanded to per-step series.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScenario {
    pub scenario: Scenario,
    /// Zone parameters after applying the static variables.
    pub params: ZoneParams,
    /// Start time of each control step.
    pub timestamps: Vec<DateTime<Utc>>,
    /// Boundaries the plant experiences, including hidden disturbances.
    pub plant: Vec<BoundarySample>,
    /// Boundaries handed to planners: the plant's, without the disturbance.
    pub predicted: Vec<BoundarySample>,
    /// Occupant setpoint override per step.
    pub overrides: Vec<Option<f64>>,
    /// Demand-response power cap per step, W.
    pub dr_caps: Vec<Option<f64>>,
}

impl ResolvedScenario {
    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}
