//! Named constants for every hidden multiplier in the testers.
//!
//! Profiles are flat key/number tables stored as JSON under `profiles/`. A custom profile starts
//! from a preset and overrides individual keys.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const THEORETICAL: &str = include_str!("../profiles/theoretical.json");
const DESK: &str = include_str!("../profiles/desk.json");

/// Every tunable constant. Caps set to `0` mean "no cap".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsProfile {
    /// Compare draws: `cmp_c · K · ln(2/δ) / η²`.
    pub cmp_c: f64,
    /// Estimate-Neighborhood sample size: `en_sample_c · ln(4/δ) / (β η²)`.
    pub en_sample_c: f64,
    pub en_sample_max: f64,
    /// Largest number of α grid points.
    pub en_grid_max: f64,
    /// Uniformity tester: reference points per stage.
    pub unif_q: f64,
    pub unif_s_c: f64,
    pub unif_eta_c: f64,
    pub unif_delta_c: f64,
    pub known_eta_div: f64,
    pub known_m_c: f64,
    pub known_s_c: f64,
    pub ck_heavy_m_c: f64,
    pub ck_prefix_c: f64,
    pub ck_l_c: f64,
    pub ck_weigh_m_c: f64,
    pub ck_h_c: f64,
    pub eq_tilde_div: f64,
    pub eq_t_c: f64,
    pub eq_s1_c: f64,
    pub eq_s2_c: f64,
    /// Largest accuracy the approximate evaluator works at directly.
    pub ae_eps_cap: f64,
    pub ae_kappa_c: f64,
    pub ae_m_c: f64,
    pub fr_x_c: f64,
    pub fr_x_max: f64,
    pub fr_y_c: f64,
    pub fr_y_max: f64,
    pub dist_s_c: f64,
}

impl ConstantsProfile {
    pub fn theoretical() -> Self {
        serde_json::from_str(THEORETICAL).expect("bundled profile parses")
    }

    pub fn desk() -> Self {
        serde_json::from_str(DESK).expect("bundled profile parses")
    }

    /// `"theoretical"`, `"desk"`, a path to a JSON file, or a preset name followed by
    /// `:` and a JSON object of overrides, e.g. `desk:{"cmp_c":20}`.
    pub fn resolve(id: &str) -> Result<Self> {
        let (base, overrides) = match id.split_once(':') {
            Some((b, o)) => (b, Some(o)),
            None => (id, None),
        };
        let preset = match base {
            "theoretical" => Self::theoretical(),
            "desk" => Self::desk(),
            path => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Profile(format!("{path}: {e}")))?;
                return Self::theoretical().with_overrides(&text);
            }
        };
        match overrides {
            Some(o) => preset.with_overrides(o),
            None => Ok(preset),
        }
    }

    /// Replaces the keys present in a JSON object; unknown keys are an error.
    pub fn with_overrides(&self, json: &str) -> Result<Self> {
        let patch: serde_json::Map<String, serde_json::Value> =
            serde_json::from_str(json).map_err(|e| Error::Profile(e.to_string()))?;
        let mut merged = match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(m)) => m,
            _ => unreachable!("profile serialises to an object"),
        };
        for (k, v) in patch {
            merged.insert(k, v);
        }
        serde_json::from_value(serde_json::Value::Object(merged))
            .map_err(|e| Error::Profile(e.to_string()))
    }

    /// Flat key/value view, used for the report echo.
    pub fn to_table(&self) -> BTreeMap<String, f64> {
        match serde_json::to_value(self) {
            Ok(serde_json::Value::Object(m)) => m
                .into_iter()
                .map(|(k, v)| (k, v.as_f64().unwrap_or(f64::NAN)))
                .collect(),
            _ => unreachable!("profile serialises to an object"),
        }
    }

    /// Applies an optional cap where `0` means unlimited.
    pub(crate) fn capped(value: u64, cap: f64) -> u64 {
        if cap > 0.0 {
            value.min(cap as u64)
        } else {
            value
        }
    }
}

impl Default for ConstantsProfile {
    fn default() -> Self {
        Self::desk()
    }
}
