//! Scenario configuration: a flat JSON object describing market parameters,
//! the information technology, and analysis options, plus `key=value`
//! override parsing for command-line use.
//!
//! Validation is field-by-field so every rejection names the offending key;
//! unknown keys are rejected rather than ignored.

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::market::{InfoTech, MarketParams, Regime};
use crate::regions::AxisScale;

/// All keys the loader accepts. Anything else is a config error.
const KNOWN_KEYS: &[&str] = &[
    "a", "b", "d", "sigma", "m0", "alpha", "regime", "m_i", "m_j",
    "grid_size", "sigma_range", "m0_range", "resolution", "axis_scale",
    "seed", "n", "w2", "xi", "beta", "x0",
];

/// Fully validated scenario. Optional analysis fields carry defaults chosen
/// so a config containing only the six core numbers runs every command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub params: MarketParams,
    pub tech: InfoTech,
    pub regime: Regime,
    /// Noise levels for point queries (payoff, simulate); default m0.
    pub m_i: f64,
    pub m_j: f64,
    /// Brute-force verification grid resolution.
    pub grid_size: usize,
    /// (sigma, m0) axis ranges for region maps; None = auto-bracket thresholds.
    pub sigma_range: Option<(f64, f64)>,
    pub m0_range: Option<(f64, f64)>,
    /// Region-map resolution (sigma cells, m0 cells).
    pub resolution: (usize, usize),
    pub axis_scale: AxisScale,
    pub seed: u64,
    /// Monte-Carlo sample count.
    pub n: u64,
    /// Heavy-tail mixture overrides; None = module defaults.
    pub w2: Option<f64>,
    pub xi: Option<f64>,
    pub beta: Option<f64>,
    pub x0: Option<f64>,
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)
            .map_err(|e| Error::scenario(format!("invalid JSON: {e}")))?;
        Self::from_value(&value)
    }

    pub fn from_value(value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::scenario("scenario must be a JSON object"))?;
        for key in obj.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::scenario(format!("unknown field \"{key}\"")));
            }
        }

        let a = require_number(obj, "a")?;
        let b = require_number(obj, "b")?;
        let sigma = require_number(obj, "sigma")?;
        let m0 = require_number(obj, "m0")?;
        let alpha = require_number(obj, "alpha")?;
        let d = optional_number(obj, "d")?.unwrap_or(b);

        let params = MarketParams::new(a, b, d)?;
        let tech = InfoTech::new(sigma, m0, alpha)?;

        let regime = match obj.get("regime") {
            None => Regime::Sharing,
            Some(v) => parse_regime(v.as_str().ok_or_else(|| {
                Error::scenario("field \"regime\" must be a string")
            })?)?,
        };

        let m_i = optional_number(obj, "m_i")?.unwrap_or(m0);
        let m_j = optional_number(obj, "m_j")?.unwrap_or(m0);
        crate::market::check_noise(m_i, &tech)
            .map_err(|e| Error::scenario(format!("field \"m_i\": {e}")))?;
        crate::market::check_noise(m_j, &tech)
            .map_err(|e| Error::scenario(format!("field \"m_j\": {e}")))?;

        let grid_size = optional_count(obj, "grid_size")?.unwrap_or(200);
        let sigma_range = optional_range(obj, "sigma_range")?;
        let m0_range = optional_range(obj, "m0_range")?;
        let resolution = match obj.get("resolution") {
            None => (100, 100),
            Some(v) => {
                let pair = v.as_array().filter(|a| a.len() == 2).ok_or_else(|| {
                    Error::scenario("field \"resolution\" must be a 2-element array")
                })?;
                let get = |i: usize| {
                    pair[i].as_u64().filter(|&k| k >= 2).ok_or_else(|| {
                        Error::scenario("field \"resolution\" entries must be integers >= 2")
                    })
                };
                (get(0)? as usize, get(1)? as usize)
            }
        };
        let axis_scale = match obj.get("axis_scale") {
            None => AxisScale::Geometric,
            Some(v) => match v.as_str() {
                Some("geometric") => AxisScale::Geometric,
                Some("linear") => AxisScale::Linear,
                _ => {
                    return Err(Error::scenario(
                        "field \"axis_scale\" must be \"geometric\" or \"linear\"",
                    ))
                }
            },
        };
        let seed = optional_count(obj, "seed")?.unwrap_or(0) as u64;
        let n = optional_count(obj, "n")?.unwrap_or(1_000_000) as u64;

        let w2 = optional_number(obj, "w2")?;
        let xi = optional_number(obj, "xi")?;
        let beta = optional_number(obj, "beta")?;
        let x0 = optional_number(obj, "x0")?;
        if let Some(w2) = w2 {
            if !(0.0..=1.0).contains(&w2) {
                return Err(Error::scenario("field \"w2\" must lie in [0, 1]"));
            }
        }

        Ok(ScenarioConfig {
            params,
            tech,
            regime,
            m_i,
            m_j,
            grid_size,
            sigma_range,
            m0_range,
            resolution,
            axis_scale,
            seed,
            n,
            w2,
            xi,
            beta,
            x0,
        })
    }

    /// Load a JSON scenario and apply `key=value` overrides in order.
    pub fn from_json_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text)
            .map_err(|e| Error::scenario(format!("invalid JSON: {e}")))?;
        for spec in overrides {
            let (key, parsed) = parse_override(spec)?;
            let obj = value
                .as_object_mut()
                .ok_or_else(|| Error::scenario("scenario must be a JSON object"))?;
            obj.insert(key, parsed);
        }
        Self::from_value(&value)
    }
}

/// Parse one `key=value` override. The value is interpreted as JSON when it
/// parses as such (numbers, arrays, booleans), otherwise as a bare string so
/// `regime=sharing` works without quoting.
pub fn parse_override(spec: &str) -> Result<(String, Value)> {
    let (key, raw) = spec.split_once('=').ok_or_else(|| {
        Error::scenario(format!("override \"{spec}\" is not of the form key=value"))
    })?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::scenario(format!(
            "override \"{spec}\" has an empty key"
        )));
    }
    if !KNOWN_KEYS.contains(&key) {
        return Err(Error::scenario(format!("unknown field \"{key}\"")));
    }
    let value = serde_json::from_str::<Value>(raw.trim())
        .unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    Ok((key.to_string(), value))
}

fn parse_regime(s: &str) -> Result<Regime> {
    match s {
        "sharing" => Ok(Regime::Sharing),
        "non-sharing" | "nonsharing" => Ok(Regime::NonSharing),
        other => Err(Error::scenario(format!(
            "field \"regime\" must be \"sharing\" or \"non-sharing\", got \"{other}\""
        ))),
    }
}

fn require_number(obj: &serde_json::Map<String, Value>, key: &str) -> Result<f64> {
    match obj.get(key) {
        None => Err(Error::scenario(format!("missing field \"{key}\""))),
        Some(v) => number_of(v, key),
    }
}

fn optional_number(obj: &serde_json::Map<String, Value>, key: &str) -> Result<Option<f64>> {
    obj.get(key).map(|v| number_of(v, key)).transpose()
}

fn number_of(v: &Value, key: &str) -> Result<f64> {
    let x = v
        .as_f64()
        .ok_or_else(|| Error::scenario(format!("field \"{key}\" must be a number")))?;
    if !x.is_finite() {
        return Err(Error::scenario(format!("field \"{key}\" must be finite")));
    }
    Ok(x)
}

fn optional_count(obj: &serde_json::Map<String, Value>, key: &str) -> Result<Option<usize>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => v
            .as_u64()
            .map(|k| Some(k as usize))
            .ok_or_else(|| Error::scenario(format!("field \"{key}\" must be a non-negative integer"))),
    }
}

fn optional_range(obj: &serde_json::Map<String, Value>, key: &str) -> Result<Option<(f64, f64)>> {
    match obj.get(key) {
        None => Ok(None),
        Some(v) => {
            let arr = v.as_array().filter(|a| a.len() == 2).ok_or_else(|| {
                Error::scenario(format!("field \"{key}\" must be a 2-element array"))
            })?;
            let lo = number_of(&arr[0], key)?;
            let hi = number_of(&arr[1], key)?;
            if !(lo > 0.0 && hi > lo) {
                return Err(Error::scenario(format!(
                    "field \"{key}\" must satisfy 0 < lo < hi"
                )));
            }
            Ok(Some((lo, hi)))
        }
    }
}
