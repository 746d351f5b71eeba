//! Scenario configuration.
//!
//! A configuration file is flat TOML whose keys mirror [`ScenarioConfig`].
//! An optional `preset = "desk" | "paper"` key selects the base profile that
//! the remaining keys override. Environment variables prefixed with
//! [`ENV_PREFIX`] override any key after the file is read, e.g.
//! `MBSAT_WINDOW_SLOTS=20`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const ENV_PREFIX: &str = "MBSAT_";

/// Where satellite beam gains come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeamPatternSource {
    /// Tapered-aperture Bessel pattern parameterised by peak gain and 3 dB radius.
    Parametric,
    /// Gridded pattern imported from CSV (`x_km,y_km,beam_id,gain_dbi`).
    Csv(PathBuf),
}

/// Per-user power used while Stage 1 evaluates candidate sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PowerRule {
    /// `P_max / |K|` for the set under evaluation.
    EqualSplit,
    /// Constant `P_max / M` regardless of the set size.
    PerBeam,
}

/// Conversion from a per-slot rate target to an SINR target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SinrTargetFormula {
    /// `2^(xi / (B T_k)) - 1`, consistent with `R = B log2(1 + SINR)`.
    BandwidthScaled,
    /// `2^(xi / T_k) - 1` with the rate in Mbps, taken literally.
    Literal,
}

/// Every physical and experiment constant of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_beams: usize,
    pub users_per_beam: usize,
    pub window_slots: usize,
    pub bandwidth_mhz: f64,
    pub carrier_freq_ghz: f64,
    pub max_power_w: f64,
    pub noise_variance_w: f64,
    pub rx_antenna_diameter_m: f64,
    pub rx_antenna_efficiency: f64,
    pub peak_beam_gain_dbi: f64,
    pub orbit_distance_m: f64,
    pub qos_rate_per_slot_mbps: f64,
    pub qos_slots_range: [usize; 2],
    pub rng_seed: u64,
    pub beam_pattern_source: BeamPatternSource,
    /// 3 dB footprint radius of each beam on the ground.
    pub beam_radius_km: f64,
    /// Sidelobe floor of the parametric pattern relative to the peak.
    pub pattern_floor_db: f64,
    /// Recorded for reference only; the sum-power constraint is enforced.
    pub per_beam_power_dbw: f64,
    pub power_rule: PowerRule,
    pub sinr_target_formula: SinrTargetFormula,
    /// Orthogonality threshold of semiorthogonal user selection.
    pub sus_alpha: f64,
    /// SCA stop threshold as a fraction of the current sum throughput.
    pub sca_epsilon_rel: f64,
    pub sca_max_iter: usize,
}

pub fn dbw_to_watts(dbw: f64) -> f64 {
    10f64.powf(dbw / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ScenarioConfig {
    /// Seven beams, 15 users per beam, 50 slots.
    pub fn desk() -> Self {
        Self {
            num_beams: 7,
            users_per_beam: 15,
            window_slots: 50,
            bandwidth_mhz: 500.0,
            carrier_freq_ghz: 19.95,
            max_power_w: dbw_to_watts(18.45),
            noise_variance_w: dbw_to_watts(-118.3),
            rx_antenna_diameter_m: 0.6,
            rx_antenna_efficiency: 0.6,
            peak_beam_gain_dbi: 44.4,
            orbit_distance_m: 35_786_000.0,
            qos_rate_per_slot_mbps: 500.0,
            qos_slots_range: [0, 13],
            rng_seed: 1,
            beam_pattern_source: BeamPatternSource::Parametric,
            beam_radius_km: 150.0,
            pattern_floor_db: -40.0,
            per_beam_power_dbw: 10.0,
            power_rule: PowerRule::EqualSplit,
            sinr_target_formula: SinrTargetFormula::BandwidthScaled,
            sus_alpha: 0.4,
            sca_epsilon_rel: 1e-3,
            sca_max_iter: 50,
        }
    }

    /// 110 users per beam over 500 slots.
    pub fn paper_scale() -> Self {
        Self {
            users_per_beam: 110,
            window_slots: 500,
            ..Self::desk()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "desk" => Ok(Self::desk()),
            "paper" | "paper-scale" => Ok(Self::paper_scale()),
            other => Err(Error::config(
                "preset",
                format!("unknown preset `{other}` (expected `desk` or `paper`)"),
            )),
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_beams * self.users_per_beam
    }

    pub fn wavelength_m(&self) -> f64 {
        crate::channel::wavelength(self.carrier_freq_ghz)
    }

    /// Half-power angle of a beam seen from the satellite.
    pub fn theta_3db(&self) -> f64 {
        (self.beam_radius_km * 1e3 / self.orbit_distance_m).atan()
    }

    pub fn validate(&self) -> Result<()> {
        fn positive(field: &str, v: f64) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must be finite and > 0, got {v}")))
            }
        }
        if self.num_beams < 1 {
            return Err(Error::config("num_beams", "must be at least 1"));
        }
        if self.window_slots < 1 {
            return Err(Error::config("window_slots", "must be at least 1"));
        }
        positive("bandwidth_mhz", self.bandwidth_mhz)?;
        positive("carrier_freq_ghz", self.carrier_freq_ghz)?;
        positive("max_power_w", self.max_power_w)?;
        positive("noise_variance_w", self.noise_variance_w)?;
        positive("rx_antenna_diameter_m", self.rx_antenna_diameter_m)?;
        positive("orbit_distance_m", self.orbit_distance_m)?;
        positive("beam_radius_km", self.beam_radius_km)?;
        positive("sca_epsilon_rel", self.sca_epsilon_rel)?;
        if !(self.rx_antenna_efficiency > 0.0 && self.rx_antenna_efficiency <= 1.0) {
            return Err(Error::config(
                "rx_antenna_efficiency",
                format!("must lie in (0, 1], got {}", self.rx_antenna_efficiency),
            ));
        }
        if !self.peak_beam_gain_dbi.is_finite() {
            return Err(Error::config("peak_beam_gain_dbi", "must be finite"));
        }
        if !(self.pattern_floor_db.is_finite() && self.pattern_floor_db < 0.0) {
            return Err(Error::config("pattern_floor_db", "must be finite and < 0"));
        }
        if !(self.qos_rate_per_slot_mbps.is_finite() && self.qos_rate_per_slot_mbps >= 0.0) {
            return Err(Error::config("qos_rate_per_slot_mbps", "must be finite and >= 0"));
        }
        let [lo, hi] = self.qos_slots_range;
        if lo > hi || hi > self.window_slots {
            return Err(Error::config(
                "qos_slots_range",
                format!(
                    "need min <= max <= window_slots ({}), got [{lo}, {hi}]",
                    self.window_slots
                ),
            ));
        }
        if !(self.sus_alpha > 0.0 && self.sus_alpha <= 1.0) {
            return Err(Error::config("sus_alpha", "must lie in (0, 1]"));
        }
        if self.sca_max_iter < 1 {
            return Err(Error::config("sca_max_iter", "must be at least 1"));
        }
        Ok(())
    }

    /// Parses TOML text, applying `preset` and then the given overrides.
    pub fn from_toml_with_overrides<I>(text: &str, overrides: I) -> Result<Self>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut table: toml::Table = toml::from_str(text)
            .map_err(|e| Error::config("<file>", e.to_string()))?;
        let preset = match table.remove("preset") {
            None => "desk".to_string(),
            Some(toml::Value::String(s)) => s,
            Some(other) => {
                return Err(Error::config("preset", format!("expected a string, got {other}")))
            }
        };
        let base = Self::preset(&preset)?;
        let mut merged = toml::Table::try_from(&base)
            .map_err(|e| Error::config("<preset>", e.to_string()))?;
        for (k, v) in table {
            merged.insert(k, v);
        }
        for (key, raw) in overrides {
            merged.insert(key, parse_override_value(&raw));
        }
        let cfg: Self = toml::Value::Table(merged)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config(field_of(&e), e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_toml_with_overrides(text, std::iter::empty())
    }

    /// Reads a config file and applies `MBSAT_*` environment overrides.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_with_overrides(&text, env_overrides())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }
}

/// `MBSAT_FOO_BAR=v` becomes `("foo_bar", "v")`. Sorted so application order is stable.
pub fn env_overrides() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = std::env::vars()
        .filter_map(|(k, v)| {
            k.strip_prefix(ENV_PREFIX)
                .map(|rest| (rest.to_ascii_lowercase(), v))
        })
        .collect();
    out.sort();
    out
}

fn parse_override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn field_of(e: &toml::de::Error) -> String {
    // toml reports unknown fields as "unknown field `x`"
    let msg = e.message();
    if let Some(start) = msg.find('`') {
        if let Some(len) = msg[start + 1..].find('`') {
            return msg[start + 1..start + 1 + len].to_string();
        }
    }
    "<file>".to_string()
}
