//! 0-10 radar scoring and ranking of controllers.
//!
//! Per KPI, the best controller scores 10 and the others are scaled
//! relative to it. The overall rank is the unweighted mean of the scores.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kpi::{Kpi, KpiReport};

/// Tolerance of the 10-point anchor.
pub const ANCHOR_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiOrientation(pub BTreeMap<Kpi, Direction>);

impl Default for KpiOrientation {
    fn default() -> Self {
        use Direction::*;
        Self(
            Kpi::ALL
                .into_iter()
                .map(|k| {
                    let d = match k {
                        Kpi::EnergySavingsPct
                        | Kpi::PeSavingsPct
                        | Kpi::CostSavingsPct
                        | Kpi::PeakPowerReductionPct => HigherIsBetter,
                        Kpi::Cost | Kpi::PctTimeOutsideComfort | Kpi::TotalDegreeHours | Kpi::PlannerMeanTimeS => {
                            LowerIsBetter
                        }
                    };
                    (k, d)
                })
                .collect(),
        )
    }
}

impl KpiOrientation {
    pub fn direction(&self, kpi: Kpi) -> Direction {
        self.0[&kpi]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerScores {
    pub controller: String,
    /// Score per axis, in [0, 10].
    pub scores: Vec<f64>,
    /// Raw KPI value per axis; `None` when undefined (scored 0).
    pub raw: Vec<Option<f64>>,
}

impl ControllerScores {
    pub fn mean(&self) -> f64 {
        if self.scores.is_empty() {
            0.0
        } else {
            self.scores.iter().sum::<f64>() / self.scores.len() as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarScores {
    pub scenario_id: String,
    pub manifest_hash: Option<String>,
    pub axes: Vec<Kpi>,
    pub directions: Vec<Direction>,
    /// Best raw value per axis; `None` for aggregated tables.
    pub best: Vec<Option<f64>>,
    pub controllers: Vec<ControllerScores>,
    /// Requested KPIs dropped because no controller had a value.
    pub dropped: Vec<Kpi>,
}

fn score(v: f64, best: f64, direction: Direction) -> f64 {
    match direction {
        Direction::HigherIsBetter if best > 0.0 => 10.0 * (v.max(0.0) / best),
        Direction::LowerIsBetter if best > 0.0 => 10.0 * (best / v),
        _ if v == best => 10.0,
        _ => 0.0,
    }
}

/// Score `reports` on each of `kpis`. A KPI without a value for any
/// controller is dropped from the axes.
pub fn normalize(scenario_id: &str, reports: &[KpiReport], kpis: &[Kpi], orientation: &KpiOrientation) -> RadarScores {
    let mut axes = Vec::new();
    let mut dropped = Vec::new();
    for &kpi in kpis {
        if reports.iter().any(|r| kpi.value(r).is_some_and(f64::is_finite)) {
            axes.push(kpi);
        } else {
            dropped.push(kpi);
        }
    }
    let directions: Vec<Direction> = axes.iter().map(|&k| orientation.direction(k)).collect();
    let raw: Vec<Vec<Option<f64>>> = reports
        .iter()
        .map(|r| axes.iter().map(|k| k.value(r).filter(|v| v.is_finite())).collect())
        .collect();
    let best: Vec<f64> = (0..axes.len())
        .map(|a| {
            let values = raw.iter().filter_map(|r| r[a]);
            match directions[a] {
                Direction::HigherIsBetter => values.fold(f64::NEG_INFINITY, f64::max),
                Direction::LowerIsBetter => values.fold(f64::INFINITY, f64::min),
            }
        })
        .collect();
    let controllers = reports
        .iter()
        .zip(raw)
        .map(|(report, raw)| ControllerScores {
            controller: report.controller.clone(),
            scores: raw
                .iter()
                .enumerate()
                .map(|(a, v)| v.map_or(0.0, |v| score(v, best[a], directions[a])))
                .collect(),
            raw,
        })
        .collect();
    RadarScores {
        scenario_id: scenario_id.to_string(),
        manifest_hash: None,
        axes,
        directions,
        best: best.into_iter().map(Some).collect(),
        controllers,
        dropped,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub controller: String,
    pub mean: f64,
    /// Another controller has exactly the same mean.
    pub tied: bool,
}

/// Controllers by descending mean score; equal means go alphabetically.
pub fn rank(scores: &RadarScores) -> Vec<RankEntry> {
    let mut entries: Vec<RankEntry> = scores
        .controllers
        .iter()
        .map(|c| RankEntry {
            rank: 0,
            controller: c.controller.clone(),
            mean: c.mean(),
            tied: false,
        })
        .collect();
    entries.sort_by(|a, b| b.mean.total_cmp(&a.mean).then_with(|| a.controller.cmp(&b.controller)));
    let means: Vec<f64> = entries.iter().map(|e| e.mean).collect();
    for (i, e) in entries.iter_mut().enumerate() {
        e.rank = i + 1;
        e.tied = means.iter().enumerate().any(|(j, m)| j != i && *m == e.mean);
    }
    entries
}

#[derive(Debug, Error)]
pub enum RankingError {
    #[error("a radar chart needs at least 3 axes, got {0}")]
    TooFewAxes(usize),
    #[error("nothing to aggregate")]
    Empty,
    #[error("score tables are incompatible: {0}")]
    SchemaMismatch(String),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
}

/// Per-KPI mean of normalized scores over several scenarios. Only axes
/// scored in every scenario are kept; the controller lists must agree.
pub fn aggregate(tables: &[RadarScores]) -> Result<RadarScores, RankingError> {
    let first = tables.first().ok_or(RankingError::Empty)?;
    let names = |t: &RadarScores| t.controllers.iter().map(|c| c.controller.clone()).collect::<Vec<_>>();
    for t in &tables[1..] {
        if names(t) != names(first) {
            return Err(RankingError::SchemaMismatch(format!(
                "scenario `{}` ranks {:?}, scenario `{}` ranks {:?}",
                first.scenario_id,
                names(first),
                t.scenario_id,
                names(t)
            )));
        }
    }
    let column = |t: &RadarScores, kpi: Kpi| t.axes.iter().position(|k| *k == kpi);
    let axes: Vec<Kpi> = first
        .axes
        .iter()
        .copied()
        .filter(|&k| tables.iter().all(|t| column(t, k).is_some()))
        .collect();
    let mut dropped: Vec<Kpi> = tables
        .iter()
        .flat_map(|t| t.axes.iter().chain(&t.dropped))
        .copied()
        .filter(|k| !axes.contains(k))
        .collect();
    dropped.sort();
    dropped.dedup();
    let n = tables.len() as f64;
    let controllers = first
        .controllers
        .iter()
        .enumerate()
        .map(|(c, head)| ControllerScores {
            controller: head.controller.clone(),
            scores: axes
                .iter()
                .map(|&k| {
                    tables
                        .iter()
                        .map(|t| t.controllers[c].scores[column(t, k).unwrap()])
                        .sum::<f64>()
                        / n
                })
                .collect(),
            raw: vec![None; axes.len()],
        })
        .collect();
    let ids: Vec<&str> = tables.iter().map(|t| t.scenario_id.as_str()).collect();
    Ok(RadarScores {
        scenario_id: ids.join("+"),
        manifest_hash: None,
        directions: axes
            .iter()
            .map(|&k| first.directions[column(first, k).unwrap()])
            .collect(),
        best: vec![None; axes.len()],
        axes,
        controllers,
        dropped,
    })
}

impl RadarScores {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scores serialize")
    }

    /// One row per controller with the score on every axis.
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(writer);
        let mut header = vec!["scenario_id".to_string(), "manifest_hash".into(), "controller".into()];
        header.extend(self.axes.iter().map(|k| k.name().to_string()));
        header.push("mean".into());
        out.write_record(&header)?;
        for c in &self.controllers {
            let mut row = vec![
                self.scenario_id.clone(),
                self.manifest_hash.clone().unwrap_or_default(),
                c.controller.clone(),
            ];
            row.extend(c.scores.iter().map(|s| s.to_string()));
            row.push(c.mean().to_string());
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const SIZE: f64 = 640.0;
const RADIUS: f64 = 220.0;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Vertex of `value` (0..10) on axis `a` of `n`, starting at 12 o'clock.
fn vertex(a: usize, n: usize, value: f64) -> (f64, f64) {
    let angle = std::f64::consts::TAU * a as f64 / n as f64;
    let r = RADIUS * value / 10.0;
    (SIZE / 2.0 + r * angle.sin(), SIZE / 2.0 - r * angle.cos())
}

/// Render the radar chart as SVG text.
pub fn render_radar(scores: &RadarScores) -> Result<String, RankingError> {
    let n = scores.axes.len();
    if n < 3 {
        return Err(RankingError::TooFewAxes(n));
    }
    let legend_height = 20.0 * scores.controllers.len() as f64;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = SIZE,
        h = SIZE + legend_height + 10.0
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        SIZE / 2.0,
        escape(&scores.scenario_id)
    );
    for ring in [2.0, 4.0, 6.0, 8.0, 10.0] {
        let points: Vec<String> = (0..n)
            .map(|a| {
                let (x, y) = vertex(a, n, ring);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r##"<polygon points="{}" fill="none" stroke="#cccccc" stroke-width="1"/>"##,
            points.join(" ")
        );
    }
    for (a, kpi) in scores.axes.iter().enumerate() {
        let (x, y) = vertex(a, n, 10.0);
        let (lx, ly) = vertex(a, n, 11.2);
        let _ = writeln!(
            svg,
            r##"<line x1="{c:.2}" y1="{c:.2}" x2="{x:.2}" y2="{y:.2}" stroke="#999999" stroke-width="1"/>"##,
            c = SIZE / 2.0
        );
        let anchor = if (lx - SIZE / 2.0).abs() < 1.0 {
            "middle"
        } else if lx > SIZE / 2.0 {
            "start"
        } else {
            "end"
        };
        let _ = writeln!(
            svg,
            r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="{anchor}" dominant-baseline="middle">{}</text>"#,
            escape(kpi.name())
        );
    }
    for (i, c) in scores.controllers.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = c
            .scores
            .iter()
            .enumerate()
            .map(|(a, s)| {
                let (x, y) = vertex(a, n, *s);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polygon class="controller" data-controller="{id}" points="{pts}" fill="{color}" fill-opacity="0.15" stroke="{color}" stroke-width="2"/>"#,
            id = escape(&c.controller),
            pts = points.join(" ")
        );
        let y = SIZE + 20.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="20" y="{:.1}" width="12" height="12" fill="{color}"/><text x="40" y="{:.1}">{}</text>"#,
            y - 10.0,
            y,
            escape(&c.controller)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Write the radar chart to `path`.
pub fn emit_radar(scores: &RadarScores, path: &Path) -> Result<(), RankingError> {
    let svg = render_radar(scores)?;
    std::fs::write(path, svg).map_err(|source| RankingError::Io {
        path: path.to_path_buf(),
        source,
    })
}
