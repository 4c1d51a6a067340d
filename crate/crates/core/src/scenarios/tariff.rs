//! Energy prices and primary-energy factors, both either constant or given
//! per period of the day.

use chrono::{DateTime, Timelike, Utc};
use serde::{Deserialize, Serialize};

/// A value attached to the hours `[start_hour, end_hour)` of every day.
/// `start_hour > end_hour` wraps past midnight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DailyPeriod {
    pub start_hour: u32,
    pub end_hour: u32,
    pub value: f64,
}

impl DailyPeriod {
    pub fn contains(&self, hour: u32) -> bool {
        if self.start_hour <= self.end_hour {
            (self.start_hour..self.end_hour).contains(&hour)
        } else {
            hour >= self.start_hour || hour < self.end_hour
        }
    }
}

/// Value for the hour of day of `ts`: the first period that covers it.
pub fn lookup(periods: &[DailyPeriod], ts: DateTime<Utc>) -> Option<f64> {
    let hour = ts.hour();
    periods.iter().find(|p| p.contains(hour)).map(|p| p.value)
}

/// First hour of the day not covered by any period.
pub fn first_uncovered_hour(periods: &[DailyPeriod]) -> Option<u32> {
    (0..24).find(|h| !periods.iter().any(|p| p.contains(*h)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Tariff {
    Flat { price_per_kwh: f64 },
    TimeOfUse { periods: Vec<DailyPeriod> },
}

impl Tariff {
    /// Price per kWh at `ts`; `None` when the table leaves that hour uncovered.
    pub fn price(&self, ts: DateTime<Utc>) -> Option<f64> {
        match self {
            Tariff::Flat { price_per_kwh } => Some(*price_per_kwh),
            Tariff::TimeOfUse { periods } => lookup(periods, ts),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Tariff::Flat { price_per_kwh } => vec![*price_per_kwh],
            Tariff::TimeOfUse { periods } => periods.iter().map(|p| p.value).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PeFactor {
    Constant { factor: f64 },
    Periods { periods: Vec<DailyPeriod> },
}

impl PeFactor {
    pub fn factor(&self, ts: DateTime<Utc>) -> Option<f64> {
        match self {
            PeFactor::Constant { factor } => Some(*factor),
            PeFactor::Periods { periods } => lookup(periods, ts),
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            PeFactor::Constant { factor } => vec![*factor],
            PeFactor::Periods { periods } => periods.iter().map(|p| p.value).collect(),
        }
    }
}
