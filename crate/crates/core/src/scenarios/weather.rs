//! Outdoor weather series: seeded synthetic generation and the CSV exchange format.
//!
//! CSV layout: header `timestamp,t_out_c,solar_wm2`, one row per step,
//! ISO-8601 UTC timestamps at a uniform step.

use std::f64::consts::PI;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Duration, SecondsFormat, TimeZone, Timelike, Utc};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::ScenarioError;

pub const WEATHER_HEADER: [&str; 3] = ["timestamp", "t_out_c", "solar_wm2"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeatherSeries {
    pub start: DateTime<Utc>,
    /// Sample spacing, s.
    pub step: f64,
    pub t_out: Vec<f64>,
    pub solar: Vec<f64>,
}

impl WeatherSeries {
    pub fn len(&self) -> usize {
        self.t_out.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_out.is_empty()
    }

    pub fn timestamp(&self, index: usize) -> DateTime<Utc> {
        self.start + Duration::milliseconds((self.step * 1000.0).round() as i64 * index as i64)
    }

    pub fn check(&self) -> Result<(), ScenarioError> {
        if self.t_out.len() != self.solar.len() {
            return Err(ScenarioError::Weather(format!(
                "t_out has {} samples but solar has {}",
                self.t_out.len(),
                self.solar.len()
            )));
        }
        if !(self.step > 0.0) {
            return Err(ScenarioError::Weather(format!("non-positive step {}", self.step)));
        }
        if let Some(i) = self.solar.iter().position(|s| !(*s >= 0.0)) {
            return Err(ScenarioError::Weather(format!(
                "solar sample {i} is negative or not a number"
            )));
        }
        if let Some(i) = self.t_out.iter().position(|t| !t.is_finite()) {
            return Err(ScenarioError::Weather(format!("t_out sample {i} is not finite")));
        }
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), ScenarioError> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(WEATHER_HEADER)?;
        for i in 0..self.len() {
            out.write_record([
                self.timestamp(i).to_rfc3339_opts(SecondsFormat::Secs, true),
                self.t_out[i].to_string(),
                self.solar[i].to_string(),
            ])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), ScenarioError> {
        let file = std::fs::File::create(path).map_err(|e| ScenarioError::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// Parameters of the synthetic winter weather generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthWeather {
    pub seed: u64,
    pub start: DateTime<Utc>,
    /// Daily mean outdoor temperature, °C.
    pub mean: f64,
    /// Half peak-to-peak daily swing, °C.
    pub amplitude: f64,
    /// Standard deviation of the hourly Gaussian noise, °C.
    pub noise_std: f64,
    /// Clear-sky noon flux, W/m².
    pub solar_peak: f64,
}

impl SynthWeather {
    /// Cold, sunny-ish heating-season week starting on a Monday.
    pub fn winter(seed: u64) -> Self {
        Self {
            seed,
            start: Utc.with_ymd_and_hms(2024, 1, 15, 0, 0, 0).unwrap(),
            mean: 3.0,
            amplitude: 4.0,
            noise_std: 1.0,
            solar_peak: 350.0,
        }
    }

    pub fn generate(&self, days: usize) -> WeatherSeries {
        synth_weather(
            self.seed,
            days,
            self.mean,
            self.amplitude,
            self.noise_std,
            self.solar_peak,
            self.start,
        )
    }
}

/// Hourly synthetic weather: a cosine daily cycle coldest at midnight plus
/// seeded Gaussian noise, and a half-cosine solar arc peaking at noon.
pub fn synth_weather(
    seed: u64,
    days: usize,
    mean: f64,
    amplitude: f64,
    noise_std: f64,
    solar_peak: f64,
    start: DateTime<Utc>,
) -> WeatherSeries {
    let n = days.max(1) * 24;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_std.max(0.0)).expect("finite std");

    let mut t_out = Vec::with_capacity(n);
    let mut solar = Vec::with_capacity(n);
    for k in 0..n {
        let ts = start + Duration::hours(k as i64);
        let hour = ts.hour() as f64 + ts.minute() as f64 / 60.0;
        let phase = (PI * (hour / 12.0)).cos();
        let jitter = if noise_std > 0.0 { noise.sample(&mut rng) } else { 0.0 };
        t_out.push(mean - amplitude * phase + jitter);
        solar.push((solar_peak * -phase).max(0.0));
    }
    WeatherSeries {
        start,
        step: 3600.0,
        t_out,
        solar,
    }
}

pub fn load_weather(path: &Path) -> Result<WeatherSeries, ScenarioError> {
    let file = std::fs::File::open(path).map_err(|e| ScenarioError::io(path, e))?;
    read_weather(file)
}

pub fn read_weather<R: Read>(reader: R) -> Result<WeatherSeries, ScenarioError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);

    let header = rdr.headers().map_err(|e| ScenarioError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if header.iter().ne(WEATHER_HEADER) {
        return Err(ScenarioError::Parse {
            line: 1,
            message: format!("expected header `{}`", WEATHER_HEADER.join(",")),
        });
    }

    let mut times: Vec<DateTime<Utc>> = Vec::new();
    let mut t_out = Vec::new();
    let mut solar = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let line = row + 2;
        let record = record.map_err(|e| ScenarioError::Parse {
            line,
            message: e.to_string(),
        })?;
        let field = |i: usize| record.get(i).unwrap_or("");
        let ts = DateTime::parse_from_rfc3339(field(0))
            .map_err(|e| ScenarioError::Parse {
                line,
                message: format!("bad timestamp `{}`: {e}", field(0)),
            })?
            .with_timezone(&Utc);
        let number = |i: usize, name: &str| {
            field(i).parse::<f64>().map_err(|e| ScenarioError::Parse {
                line,
                message: format!("bad {name} `{}`: {e}", field(i)),
            })
        };
        let t = number(1, "t_out_c")?;
        let s = number(2, "solar_wm2")?;
        if !t.is_finite() {
            return Err(ScenarioError::Parse {
                line,
                message: "t_out_c must be finite".into(),
            });
        }
        if !(s >= 0.0) {
            return Err(ScenarioError::Parse {
                line,
                message: format!("solar_wm2 must be >= 0, got {s}"),
            });
        }
        times.push(ts);
        t_out.push(t);
        solar.push(s);
    }

    if times.len() < 2 {
        return Err(ScenarioError::Parse {
            line: times.len() + 2,
            message: "need at least two rows to establish the time step".into(),
        });
    }
    let step = times[1] - times[0];
    for (i, pair) in times.windows(2).enumerate() {
        let delta = pair[1] - pair[0];
        if delta <= Duration::zero() || delta != step {
            return Err(ScenarioError::Gap {
                row: i + 2,
                message: format!(
                    "timestamp {} follows {} with spacing {}s (expected {}s)",
                    pair[1],
                    pair[0],
                    delta.num_seconds(),
                    step.num_seconds()
                ),
            });
        }
    }

    Ok(WeatherSeries {
        start: times[0],
        step: step.num_milliseconds() as f64 / 1000.0,
        t_out,
        solar,
    })
}
