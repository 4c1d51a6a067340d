use serde::{Deserialize, Serialize};

use super::EmulatorError;

/// Physical parameters of the two-node zone and its heater.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneParams {
    /// Heat capacity of the air node (air plus furnishings), J/K.
    pub c_air: f64,
    /// Heat capacity of the envelope mass node, J/K.
    pub c_env: f64,
    /// Air to envelope resistance, K/W.
    pub r_ie: f64,
    /// Envelope to outdoor resistance, K/W.
    pub r_ea: f64,
    /// Air to outdoor resistance (infiltration and glazing), K/W.
    pub r_inf: f64,
    /// Glazed area, m².
    pub window_area: f64,
    /// Solar heat gain coefficient of the glazing.
    pub shgc: f64,
    /// Fraction of transmitted solar heat landing on the air node.
    pub solar_split: f64,
    /// Heater thermal output limit, W.
    pub p_max: f64,
    /// Delivered heat per unit of final energy.
    pub efficiency: f64,
    /// Proportional gain of the local heater loop, W/K.
    pub k_heater: f64,
    /// Integration substep, s.
    pub substep: f64,
}

impl Default for ZoneParams {
    /// A heavy-mass office zone of roughly 30 m² with one glazed facade.
    fn default() -> Self {
        Self {
            c_air: 1.0e6,
            c_env: 3.0e7,
            r_ie: 0.004,
            r_ea: 0.012,
            r_inf: 0.04,
            window_area: 6.0,
            shgc: 0.6,
            solar_split: 0.3,
            p_max: 5000.0,
            efficiency: 0.95,
            k_heater: 5000.0,
            substep: 60.0,
        }
    }
}

impl ZoneParams {
    pub fn validate(&self) -> Result<(), EmulatorError> {
        let positive = [
            ("c_air", self.c_air),
            ("c_env", self.c_env),
            ("r_ie", self.r_ie),
            ("r_ea", self.r_ea),
            ("r_inf", self.r_inf),
            ("p_max", self.p_max),
            ("efficiency", self.efficiency),
            ("substep", self.substep),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(EmulatorError::InvalidParams {
                    field,
                    reason: format!("must be finite and > 0, got {value}"),
                });
            }
        }
        let unit = [("shgc", self.shgc), ("solar_split", self.solar_split)];
        for (field, value) in unit {
            if !(0.0..=1.0).contains(&value) {
                return Err(EmulatorError::InvalidParams {
                    field,
                    reason: format!("must lie in [0, 1], got {value}"),
                });
            }
        }
        let non_negative = [("window_area", self.window_area), ("k_heater", self.k_heater)];
        for (field, value) in non_negative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(EmulatorError::InvalidParams {
                    field,
                    reason: format!("must be finite and >= 0, got {value}"),
                });
            }
        }
        Ok(())
    }

    /// Total air-to-outdoor resistance of the network, K/W.
    pub fn effective_resistance(&self) -> f64 {
        let through_envelope = self.r_ie + self.r_ea;
        1.0 / (1.0 / self.r_inf + 1.0 / through_envelope)
    }
}
