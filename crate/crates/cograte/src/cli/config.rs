//! Configuration file handling for the command line.
//!
//! The config is a flat key-value TOML file whose keys mirror the link
//! policy. Every key has a default (the standard operating point:
//! B = 10 kHz, σn² = 0.05, σs² = 0.12, s = 0.6, q = 0.2, p1 = 0 dB,
//! p2 = 10 dB, λ = 0.1, T = 100 ms, N = 1 ms), so an empty or missing file
//! is valid. Powers are written in dB and converted internally.
//! Command-line `--set key=value` pairs override file values.

use crate::effrate::{LinkPolicy, TxMode};
use crate::fbcode::{FrameConfig, SnrScaling};
use crate::numerics::{FadingDist, QuadratureRule, DEFAULT_QUAD_ORDER};
use crate::sensing::{ActivityChain, SensingConfig};
use serde::Deserialize;

/// Configuration error with a field-level message (exit code 2).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Flat key-value configuration, all fields optional.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub bandwidth_hz: Option<f64>,
    pub frame_secs: Option<f64>,
    pub sense_secs: Option<f64>,
    pub noise_var: Option<f64>,
    pub interference_var: Option<f64>,
    pub busy_to_idle: Option<f64>,
    pub idle_to_busy: Option<f64>,
    pub threshold: Option<f64>,
    pub power_busy_db: Option<f64>,
    pub power_idle_db: Option<f64>,
    pub mode: Option<String>,
    pub rate_busy: Option<f64>,
    pub rate_idle: Option<f64>,
    pub target_error: Option<f64>,
    pub mean_power: Option<f64>,
    pub quad_order: Option<usize>,
    pub snr_scaling: Option<String>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("config parse error: {e}")))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Apply one `key=value` override.
    pub fn set(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| ConfigError(format!("override must be key=value, got '{pair}'")))?;
        let key = key.trim();
        let value = value.trim();
        let parse_f64 = |v: &str| -> Result<f64, ConfigError> {
            v.parse()
                .map_err(|_| ConfigError(format!("field '{key}': '{v}' is not a number")))
        };
        match key {
            "bandwidth_hz" => self.bandwidth_hz = Some(parse_f64(value)?),
            "frame_secs" => self.frame_secs = Some(parse_f64(value)?),
            "sense_secs" => self.sense_secs = Some(parse_f64(value)?),
            "noise_var" => self.noise_var = Some(parse_f64(value)?),
            "interference_var" => self.interference_var = Some(parse_f64(value)?),
            "busy_to_idle" => self.busy_to_idle = Some(parse_f64(value)?),
            "idle_to_busy" => self.idle_to_busy = Some(parse_f64(value)?),
            "threshold" => self.threshold = Some(parse_f64(value)?),
            "power_busy_db" => self.power_busy_db = Some(parse_f64(value)?),
            "power_idle_db" => self.power_idle_db = Some(parse_f64(value)?),
            "mode" => self.mode = Some(value.to_string()),
            "rate_busy" => self.rate_busy = Some(parse_f64(value)?),
            "rate_idle" => self.rate_idle = Some(parse_f64(value)?),
            "target_error" => self.target_error = Some(parse_f64(value)?),
            "mean_power" => self.mean_power = Some(parse_f64(value)?),
            "quad_order" => {
                self.quad_order = Some(value.parse().map_err(|_| {
                    ConfigError(format!("field 'quad_order': '{value}' is not an integer"))
                })?)
            }
            "snr_scaling" => self.snr_scaling = Some(value.to_string()),
            other => return Err(ConfigError(format!("unknown config field '{other}'"))),
        }
        Ok(())
    }
}

/// Fully resolved parameters, defaults filled in.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub bandwidth_hz: f64,
    pub frame_secs: f64,
    pub sense_secs: f64,
    pub noise_var: f64,
    pub interference_var: f64,
    pub busy_to_idle: f64,
    pub idle_to_busy: f64,
    pub threshold: f64,
    pub power_busy: f64,
    pub power_idle: f64,
    pub mode_is_fixed: bool,
    pub rate_busy: f64,
    pub rate_idle: f64,
    pub target_error: f64,
    pub mean_power: f64,
    pub quad_order: usize,
    pub snr_scaling: SnrScaling,
}

impl Resolved {
    pub fn from_file(cfg: &FileConfig, quad_order_flag: Option<usize>) -> Result<Self, ConfigError> {
        let mode = cfg.mode.as_deref().unwrap_or("fixed");
        let mode_is_fixed = match mode {
            "fixed" => true,
            "variable" => false,
            other => {
                return Err(ConfigError(format!(
                    "field 'mode': expected 'fixed' or 'variable', got '{other}'"
                )))
            }
        };
        let snr_scaling = match cfg.snr_scaling.as_deref().unwrap_or("none") {
            "none" => SnrScaling::None,
            "energy-constrained" => SnrScaling::EnergyConstrained,
            other => {
                return Err(ConfigError(format!(
                    "field 'snr_scaling': expected 'none' or 'energy-constrained', got '{other}'"
                )))
            }
        };
        Ok(Self {
            bandwidth_hz: cfg.bandwidth_hz.unwrap_or(1e4),
            frame_secs: cfg.frame_secs.unwrap_or(0.1),
            sense_secs: cfg.sense_secs.unwrap_or(1e-3),
            noise_var: cfg.noise_var.unwrap_or(0.05),
            interference_var: cfg.interference_var.unwrap_or(0.12),
            busy_to_idle: cfg.busy_to_idle.unwrap_or(0.6),
            idle_to_busy: cfg.idle_to_busy.unwrap_or(0.2),
            threshold: cfg.threshold.unwrap_or(0.1),
            power_busy: db_to_linear(cfg.power_busy_db.unwrap_or(0.0)),
            power_idle: db_to_linear(cfg.power_idle_db.unwrap_or(10.0)),
            mode_is_fixed,
            rate_busy: cfg.rate_busy.unwrap_or(0.002),
            rate_idle: cfg.rate_idle.unwrap_or(0.025),
            target_error: cfg.target_error.unwrap_or(1e-3),
            mean_power: cfg.mean_power.unwrap_or(1.0),
            quad_order: quad_order_flag
                .or(cfg.quad_order)
                .unwrap_or(DEFAULT_QUAD_ORDER),
            snr_scaling,
        })
    }

    pub fn sensing(&self) -> Result<SensingConfig, ConfigError> {
        SensingConfig::new(
            self.sense_secs,
            self.bandwidth_hz,
            self.threshold,
            self.noise_var,
            self.interference_var,
        )
        .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn frame(&self) -> Result<FrameConfig, ConfigError> {
        FrameConfig::new(
            self.frame_secs,
            self.sense_secs,
            self.bandwidth_hz,
            self.snr_scaling,
        )
        .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn chain(&self) -> Result<ActivityChain, ConfigError> {
        ActivityChain::new(self.busy_to_idle, self.idle_to_busy)
            .map_err(|e| ConfigError(e.to_string()))
    }

    pub fn mode(&self) -> TxMode {
        if self.mode_is_fixed {
            TxMode::Fixed {
                r1: self.rate_busy,
                r2: self.rate_idle,
            }
        } else {
            TxMode::Variable {
                eps: self.target_error,
            }
        }
    }

    pub fn policy(&self) -> Result<LinkPolicy, ConfigError> {
        self.policy_with_mode(self.mode())
    }

    pub fn policy_with_mode(&self, mode: TxMode) -> Result<LinkPolicy, ConfigError> {
        let dist =
            FadingDist::exponential(self.mean_power).map_err(|e| ConfigError(e.to_string()))?;
        let rule = QuadratureRule::exponential(self.quad_order)
            .map_err(|e| ConfigError(e.to_string()))?;
        LinkPolicy::new(
            self.chain()?,
            self.sensing()?,
            self.frame()?,
            self.power_busy,
            self.power_idle,
            mode,
            dist,
            rule,
        )
        .map_err(|e| ConfigError(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_build_a_valid_policy() {
        let resolved = Resolved::from_file(&FileConfig::default(), None).unwrap();
        let policy = resolved.policy().unwrap();
        assert_eq!(policy.frame.blocklength(), 990);
        assert_eq!(policy.rule.order(), DEFAULT_QUAD_ORDER);
        assert!((policy.p1 - 1.0).abs() < 1e-12);
        assert!((policy.p2 - 10.0).abs() < 1e-12);
    }

    #[test]
    fn toml_round_trip_and_overrides() {
        let mut cfg = FileConfig::parse("threshold = 0.2\nmode = \"variable\"\n").unwrap();
        cfg.set("threshold=0.15").unwrap();
        cfg.set("quad_order = 32").unwrap();
        let resolved = Resolved::from_file(&cfg, None).unwrap();
        assert_eq!(resolved.threshold, 0.15);
        assert_eq!(resolved.quad_order, 32);
        assert!(!resolved.mode_is_fixed);
        // flag beats file
        let resolved = Resolved::from_file(&cfg, Some(64)).unwrap();
        assert_eq!(resolved.quad_order, 64);
    }

    #[test]
    fn field_level_errors() {
        assert!(FileConfig::parse("no_such_key = 1\n").is_err());
        let mut cfg = FileConfig::default();
        assert!(cfg.set("threshold=abc").is_err());
        assert!(cfg.set("nonsense=1").is_err());
        assert!(cfg.set("threshold").is_err());
        cfg.mode = Some("sideways".into());
        assert!(Resolved::from_file(&cfg, None).is_err());
    }

    #[test]
    fn db_conversion() {
        assert!((db_to_linear(0.0) - 1.0).abs() < 1e-15);
        assert!((db_to_linear(10.0) - 10.0).abs() < 1e-12);
        assert!((db_to_linear(7.0) - 5.011872336272722).abs() < 1e-12);
    }
}
