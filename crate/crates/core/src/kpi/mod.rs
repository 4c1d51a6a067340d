//! Key performance indicators computed from simulation logs.
//!
//! Four categories: energy savings, primary-energy savings, comfort and
//! flexibility. Savings are relative to the reactive controller's log for the
//! same scenario. Comfort only counts occupied steps.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::coupling::{LogRow, SimulationLog};
use crate::scenarios::{DrEvent, PeFactor, Scenario, Tariff};

const WH_PER_KWH: f64 = 1000.0;

/// Value of the training-data KPI for controllers that need no training.
pub const TRAINING_DATA_NOT_APPLICABLE: &str = "not applicable";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KpiError {
    #[error("logs differ in length: {log} vs baseline {baseline}")]
    LengthMismatch { log: usize, baseline: usize },
    #[error("baseline {quantity} is zero; the relative KPI is undefined")]
    UndefinedBaseline { quantity: &'static str },
    #[error("no {what} covers step {step} ({timestamp})")]
    Gap {
        what: &'static str,
        step: usize,
        timestamp: DateTime<Utc>,
    },
    #[error("primary-energy factor {0} is not positive")]
    InvalidFactor(f64),
    #[error("no demand-response event in the scenario")]
    NoEvent,
    #[error("log is empty")]
    EmptyLog,
}

fn relative_saving(value: f64, base: f64, quantity: &'static str) -> Result<f64, KpiError> {
    if base > 0.0 {
        Ok(100.0 * (base - value) / base)
    } else {
        Err(KpiError::UndefinedBaseline { quantity })
    }
}

fn same_length(log: &SimulationLog, baseline: &SimulationLog) -> Result<(), KpiError> {
    if log.len() == baseline.len() {
        Ok(())
    } else {
        Err(KpiError::LengthMismatch {
            log: log.len(),
            baseline: baseline.len(),
        })
    }
}

/// Total final energy, Wh.
pub fn total_energy_wh(log: &SimulationLog) -> f64 {
    log.rows.iter().map(|r| r.final_energy_wh).sum()
}

pub fn energy_savings_pct(log: &SimulationLog, baseline: &SimulationLog) -> Result<f64, KpiError> {
    same_length(log, baseline)?;
    relative_saving(total_energy_wh(log), total_energy_wh(baseline), "energy")
}

/// Final energy summed per distinct weight, keyed by the weight's bits.
fn weight_buckets(
    rows: &[LogRow],
    what: &'static str,
    weight: impl Fn(DateTime<Utc>) -> Option<f64>,
) -> Result<BTreeMap<u64, (f64, f64)>, KpiError> {
    let mut buckets: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for row in rows {
        let w = weight(row.timestamp).ok_or(KpiError::Gap {
            what,
            step: row.step,
            timestamp: row.timestamp,
        })?;
        buckets.entry(w.to_bits()).or_insert((w, 0.0)).1 += row.final_energy_wh;
    }
    Ok(buckets)
}

fn weighted_sum(buckets: &BTreeMap<u64, (f64, f64)>) -> f64 {
    buckets.values().map(|(w, e)| w * e).sum()
}

/// Relative saving of a weighted quantity. When both logs see one and the
/// same weight it cancels, and the saving is taken on plain energy.
fn weighted_saving(
    log: &SimulationLog,
    baseline: &SimulationLog,
    what: &'static str,
    quantity: &'static str,
    weight: impl Fn(DateTime<Utc>) -> Option<f64>,
) -> Result<f64, KpiError> {
    same_length(log, baseline)?;
    let test = weight_buckets(&log.rows, what, &weight)?;
    let base = weight_buckets(&baseline.rows, what, &weight)?;
    if test.len() == 1 && base.len() == 1 && test.keys().eq(base.keys()) {
        let (w, e_test) = test.values().next().copied().expect("one bucket");
        let (_, e_base) = base.values().next().copied().expect("one bucket");
        if w * e_base > 0.0 {
            return relative_saving(e_test, e_base, quantity);
        }
    }
    relative_saving(weighted_sum(&test), weighted_sum(&base), quantity)
}

fn check_factors(pe: &PeFactor) -> Result<(), KpiError> {
    match pe.values().iter().find(|f| !(**f > 0.0)) {
        Some(&bad) => Err(KpiError::InvalidFactor(bad)),
        None => Ok(()),
    }
}

/// Primary energy, Wh.
pub fn primary_energy_wh(log: &SimulationLog, pe: &PeFactor) -> Result<f64, KpiError> {
    check_factors(pe)?;
    Ok(weighted_sum(&weight_buckets(
        &log.rows,
        "primary-energy factor",
        |ts| pe.factor(ts),
    )?))
}

pub fn primary_energy_savings_pct(
    log: &SimulationLog,
    baseline: &SimulationLog,
    pe: &PeFactor,
) -> Result<f64, KpiError> {
    check_factors(pe)?;
    weighted_saving(log, baseline, "primary-energy factor", "primary energy", |ts| {
        pe.factor(ts)
    })
}

/// Energy bill in the tariff's currency.
pub fn cost(log: &SimulationLog, tariff: &Tariff) -> Result<f64, KpiError> {
    Ok(weighted_sum(&weight_buckets(&log.rows, "tariff period", |ts| tariff.price(ts))?) / WH_PER_KWH)
}

pub fn cost_savings_pct(log: &SimulationLog, baseline: &SimulationLog, tariff: &Tariff) -> Result<f64, KpiError> {
    weighted_saving(log, baseline, "tariff period", "cost", |ts| tariff.price(ts))
}

fn band_deviation(row: &LogRow, t: f64) -> f64 {
    (row.comfort_lower_c - t).max(0.0) + (t - row.comfort_upper_c).max(0.0)
}

/// A step is outside the band when its start or end temperature is.
fn step_outside(row: &LogRow) -> bool {
    band_deviation(row, row.t_air_start_c) > 0.0 || band_deviation(row, row.t_air_c) > 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComfortShare {
    pub pct: f64,
    /// Set when no step is occupied; `pct` is then 0.
    pub no_occupancy: bool,
}

/// Share of occupied steps spent outside the comfort band, %.
pub fn pct_time_outside_comfort(log: &SimulationLog) -> Result<ComfortShare, KpiError> {
    if log.is_empty() {
        return Err(KpiError::EmptyLog);
    }
    let occupied: Vec<&LogRow> = log.rows.iter().filter(|r| r.occupied).collect();
    if occupied.is_empty() {
        return Ok(ComfortShare {
            pct: 0.0,
            no_occupancy: true,
        });
    }
    let outside = occupied.iter().filter(|r| step_outside(r)).count();
    Ok(ComfortShare {
        pct: 100.0 * outside as f64 / occupied.len() as f64,
        no_occupancy: false,
    })
}

/// Trapezoidal integral of the band violation over occupied steps, °C·h.
pub fn total_degree_hours(log: &SimulationLog) -> Result<f64, KpiError> {
    if log.is_empty() {
        return Err(KpiError::EmptyLog);
    }
    let hours = log.control_step / 3600.0;
    Ok(log
        .rows
        .iter()
        .filter(|r| r.occupied)
        .map(|r| hours * (band_deviation(r, r.t_air_start_c) + band_deviation(r, r.t_air_c)) / 2.0)
        .sum())
}

/// Highest mean power of any step inside a DR window, W.
fn dr_peak_w(log: &SimulationLog, events: &[DrEvent]) -> f64 {
    let hours = log.control_step / 3600.0;
    log.rows
        .iter()
        .filter(|r| events.iter().any(|e| e.contains(r.step)))
        .map(|r| r.final_energy_wh / hours)
        .fold(0.0, f64::max)
}

pub fn peak_power_reduction_pct(
    log: &SimulationLog,
    baseline: &SimulationLog,
    events: &[DrEvent],
) -> Result<f64, KpiError> {
    if events.is_empty() {
        return Err(KpiError::NoEvent);
    }
    same_length(log, baseline)?;
    relative_saving(dr_peak_w(log, events), dr_peak_w(baseline, events), "peak power")
}

/// The indicators a report carries, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kpi {
    EnergySavingsPct,
    PeSavingsPct,
    Cost,
    CostSavingsPct,
    PctTimeOutsideComfort,
    TotalDegreeHours,
    PeakPowerReductionPct,
    PlannerMeanTimeS,
}

impl Kpi {
    pub const ALL: [Kpi; 8] = [
        Kpi::EnergySavingsPct,
        Kpi::PeSavingsPct,
        Kpi::Cost,
        Kpi::CostSavingsPct,
        Kpi::PctTimeOutsideComfort,
        Kpi::TotalDegreeHours,
        Kpi::PeakPowerReductionPct,
        Kpi::PlannerMeanTimeS,
    ];

    /// Axes of the default radar chart.
    pub const RADAR: [Kpi; 6] = [
        Kpi::EnergySavingsPct,
        Kpi::PeSavingsPct,
        Kpi::CostSavingsPct,
        Kpi::PctTimeOutsideComfort,
        Kpi::TotalDegreeHours,
        Kpi::PeakPowerReductionPct,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kpi::EnergySavingsPct => "energy_savings_pct",
            Kpi::PeSavingsPct => "pe_savings_pct",
            Kpi::Cost => "cost",
            Kpi::CostSavingsPct => "cost_savings_pct",
            Kpi::PctTimeOutsideComfort => "pct_time_outside_comfort",
            Kpi::TotalDegreeHours => "total_degree_hours",
            Kpi::PeakPowerReductionPct => "peak_power_reduction_pct",
            Kpi::PlannerMeanTimeS => "planner_mean_time_s",
        }
    }

    pub fn from_name(name: &str) -> Option<Kpi> {
        Kpi::ALL.into_iter().find(|k| k.name() == name)
    }

    pub fn value(self, report: &KpiReport) -> Option<f64> {
        match self {
            Kpi::EnergySavingsPct => report.energy_savings_pct,
            Kpi::PeSavingsPct => report.pe_savings_pct,
            Kpi::Cost => report.cost,
            Kpi::CostSavingsPct => report.cost_savings_pct,
            Kpi::PctTimeOutsideComfort => Some(report.pct_time_outside_comfort),
            Kpi::TotalDegreeHours => Some(report.total_degree_hours),
            Kpi::PeakPowerReductionPct => report.peak_power_reduction_pct,
            Kpi::PlannerMeanTimeS => report.planner_mean_time_s,
        }
    }
}

impl fmt::Display for Kpi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KpiReport {
    pub scenario_id: String,
    pub controller: String,
    pub energy_kwh: f64,
    pub energy_savings_pct: Option<f64>,
    pub pe_savings_pct: Option<f64>,
    pub cost: Option<f64>,
    pub cost_savings_pct: Option<f64>,
    pub pct_time_outside_comfort: f64,
    pub no_occupancy: bool,
    pub total_degree_hours: f64,
    pub peak_power_reduction_pct: Option<f64>,
    /// Mean planning wall time, s; only recorded on timed runs.
    pub planner_mean_time_s: Option<f64>,
    pub planning_calls: usize,
    pub candidates_evaluated: u64,
    pub training_data: String,
    /// Why each missing KPI is missing.
    pub undefined: BTreeMap<String, String>,
}

/// Reports for every controller of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSet {
    pub scenario_id: String,
    pub baseline: String,
    pub reports: Vec<KpiReport>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReportError {
    #[error("no log from the baseline controller `{0}`")]
    MissingBaseline(String),
    #[error("log of `{controller}` is for scenario `{found}`, expected `{expected}`")]
    WrongScenario {
        controller: String,
        found: String,
        expected: String,
    },
}

/// One report per log. `baseline` names the reactive controller's log.
/// Wall time enters the report only when `timing` is set, which keeps
/// untimed reports reproducible byte for byte.
pub fn build_report(
    logs: &[SimulationLog],
    baseline: &str,
    scenario: &Scenario,
    timing: bool,
) -> Result<ReportSet, ReportError> {
    let base = logs
        .iter()
        .find(|l| l.controller == baseline)
        .ok_or_else(|| ReportError::MissingBaseline(baseline.to_string()))?;
    if let Some(l) = logs.iter().find(|l| l.scenario_id != scenario.id) {
        return Err(ReportError::WrongScenario {
            controller: l.controller.clone(),
            found: l.scenario_id.clone(),
            expected: scenario.id.clone(),
        });
    }
    let reports = logs
        .iter()
        .map(|log| {
            let mut undefined = BTreeMap::new();
            let mut keep = |kpi: Kpi, r: Result<f64, KpiError>| match r {
                Ok(v) => Some(v),
                Err(e) => {
                    undefined.insert(kpi.name().to_string(), e.to_string());
                    None
                }
            };
            let energy_savings_pct = keep(Kpi::EnergySavingsPct, energy_savings_pct(log, base));
            let pe_savings_pct = keep(
                Kpi::PeSavingsPct,
                primary_energy_savings_pct(log, base, &scenario.pe_factor),
            );
            let cost_value = keep(Kpi::Cost, cost(log, &scenario.tariff));
            let cost_savings_pct = keep(Kpi::CostSavingsPct, cost_savings_pct(log, base, &scenario.tariff));
            let peak_power_reduction_pct = keep(
                Kpi::PeakPowerReductionPct,
                peak_power_reduction_pct(log, base, &scenario.dr_events),
            );
            let comfort = pct_time_outside_comfort(log).unwrap_or(ComfortShare {
                pct: 0.0,
                no_occupancy: true,
            });
            let planner_mean_time_s = if timing && !log.plans.is_empty() {
                Some(log.plans.iter().map(|p| p.wall_time_s).sum::<f64>() / log.plans.len() as f64)
            } else {
                undefined.insert(Kpi::PlannerMeanTimeS.name().to_string(), "not timed".to_string());
                None
            };
            KpiReport {
                scenario_id: scenario.id.clone(),
                controller: log.controller.clone(),
                energy_kwh: total_energy_wh(log) / WH_PER_KWH,
                energy_savings_pct,
                pe_savings_pct,
                cost: cost_value,
                cost_savings_pct,
                pct_time_outside_comfort: comfort.pct,
                no_occupancy: comfort.no_occupancy,
                total_degree_hours: total_degree_hours(log).unwrap_or(0.0),
                peak_power_reduction_pct,
                planner_mean_time_s,
                planning_calls: log.planning_calls(),
                candidates_evaluated: log.candidates_evaluated(),
                training_data: TRAINING_DATA_NOT_APPLICABLE.to_string(),
                undefined,
            }
        })
        .collect();
    Ok(ReportSet {
        scenario_id: scenario.id.clone(),
        baseline: baseline.to_string(),
        reports,
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ReportSet {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One flat row per controller; undefined KPIs are empty cells.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record([
            "scenario_id",
            "controller",
            "energy_kwh",
            "energy_savings_pct",
            "pe_savings_pct",
            "cost",
            "cost_savings_pct",
            "pct_time_outside_comfort",
            "no_occupancy",
            "total_degree_hours",
            "peak_power_reduction_pct",
            "planner_mean_time_s",
            "planning_calls",
            "candidates_evaluated",
            "training_data",
        ])?;
        for r in &self.reports {
            out.write_record([
                r.scenario_id.clone(),
                r.controller.clone(),
                r.energy_kwh.to_string(),
                cell(r.energy_savings_pct),
                cell(r.pe_savings_pct),
                cell(r.cost),
                cell(r.cost_savings_pct),
                r.pct_time_outside_comfort.to_string(),
                r.no_occupancy.to_string(),
                r.total_degree_hours.to_string(),
                cell(r.peak_power_reduction_pct),
                cell(r.planner_mean_time_s),
                r.planning_calls.to_string(),
                r.candidates_evaluated.to_string(),
                r.training_data.clone(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}
