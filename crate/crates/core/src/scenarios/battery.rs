//! Scenario batteries: systematic variations of a base scenario.
//!
//! Fields are addressed by dotted path into the scenario's JSON form, e.g.
//! `statics.envelope_scale` or `dynamics.weather.seed`.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{Scenario, ScenarioError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatteryMode {
    /// Every combination of the listed values.
    Cartesian,
    /// The base plus one scenario per single-field deviation.
    OneAtATime,
}

/// Battery file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatterySpec {
    /// Base scenario file; the built-in baseline when absent.
    #[serde(default)]
    pub base: Option<PathBuf>,
    pub mode: BatteryMode,
    pub variations: BTreeMap<String, Vec<Value>>,
}

impl BatterySpec {
    pub fn generate(&self, base: &Scenario) -> Result<Vec<Scenario>, ScenarioError> {
        generate_battery(base, &self.variations, self.mode)
    }
}

pub fn generate_battery(
    base: &Scenario,
    variations: &BTreeMap<String, Vec<Value>>,
    mode: BatteryMode,
) -> Result<Vec<Scenario>, ScenarioError> {
    let base_value = serde_json::to_value(base)?;
    for field in variations.keys() {
        if field == "id" || base_value.pointer(&pointer(field)).is_none() {
            return Err(ScenarioError::UnknownField(field.clone()));
        }
    }

    let deviations: Vec<Vec<(&str, &Value)>> = match mode {
        BatteryMode::Cartesian => {
            let mut combos: Vec<Vec<(&str, &Value)>> = vec![Vec::new()];
            for (field, values) in variations {
                combos = combos
                    .into_iter()
                    .flat_map(|prefix| {
                        values.iter().map(move |v| {
                            let mut next = prefix.clone();
                            next.push((field.as_str(), v));
                            next
                        })
                    })
                    .collect();
            }
            combos
        }
        BatteryMode::OneAtATime => {
            let mut out = vec![Vec::new()];
            for (field, values) in variations {
                let current = base_value.pointer(&pointer(field));
                for v in values {
                    if Some(v) != current {
                        out.push(vec![(field.as_str(), v)]);
                    }
                }
            }
            out
        }
    };

    deviations
        .into_iter()
        .map(|changes| apply(base, &base_value, &changes))
        .collect()
}

fn pointer(field: &str) -> String {
    format!("/{}", field.replace('.', "/"))
}

fn apply(base: &Scenario, base_value: &Value, changes: &[(&str, &Value)]) -> Result<Scenario, ScenarioError> {
    if changes.is_empty() {
        return Ok(base.clone());
    }
    let mut value = base_value.clone();
    let mut id = base.id.clone();
    for (field, v) in changes {
        *value
            .pointer_mut(&pointer(field))
            .ok_or_else(|| ScenarioError::UnknownField(field.to_string()))? = (*v).clone();
        id.push_str("__");
        id.push_str(field);
        id.push('=');
        id.push_str(&id_fragment(v));
    }
    let mut scenario: Scenario = serde_json::from_value(value).map_err(|e| ScenarioError::InvalidVariation {
        field: changes.iter().map(|(f, _)| *f).collect::<Vec<_>>().join(","),
        message: e.to_string(),
    })?;
    scenario.id = id;
    Ok(scenario)
}

fn id_fragment(v: &Value) -> String {
    let raw = match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    raw.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}
