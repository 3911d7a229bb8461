//! Engine parameters and the action-rule table.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec2;

/// What an action does to the attachment graph. Indices refer to positions in
/// the event's argument list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Attach { child: usize, parent: usize },
    Detach { child: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionRule {
    pub action: String,
    pub effect: Effect,
}

impl ActionRule {
    pub fn attach(action: &str, child: usize, parent: usize) -> Self {
        Self {
            action: action.to_owned(),
            effect: Effect::Attach { child, parent },
        }
    }

    pub fn detach(action: &str, child: usize) -> Self {
        Self {
            action: action.to_owned(),
            effect: Effect::Detach { child },
        }
    }
}

/// `contain(cone, obj)`, `pick-up(hand, obj)`, `insert(obj, case)` attach;
/// `uncover(cone, obj)`, `put-down(hand, obj)` detach.
pub fn default_action_rules() -> Vec<ActionRule> {
    vec![
        ActionRule::attach("contain", 1, 0),
        ActionRule::attach("pick-up", 1, 0),
        ActionRule::attach("insert", 0, 1),
        ActionRule::detach("uncover", 1),
        ActionRule::detach("put-down", 1),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    /// Maximum alignment cost accepted for a match (squared pixels).
    pub tau: f64,
    /// Cost multiplier applied when percept and anchor types differ.
    pub psi_mismatch: f64,
    pub conf_inc: f64,
    pub conf_dec: f64,
    pub kappa_anch: f64,
    pub kappa_inf: f64,
    /// Image width and height in pixels.
    pub field_of_view: Vec2,
    pub action_rules: Vec<ActionRule>,
}

impl EngineConfig {
    /// Snitch-localisation settings: tau = 6500, kappa_anch = 0.1,
    /// conf+ = conf- = 0.1, 360x240 frames, `contain` attaches.
    pub fn benchmark() -> Self {
        Self {
            tau: 6500.0,
            psi_mismatch: 10.0,
            conf_inc: 0.1,
            conf_dec: 0.1,
            kappa_anch: 0.1,
            kappa_inf: 0.1,
            field_of_view: Vec2::new(360.0, 240.0),
            action_rules: default_action_rules(),
        }
    }

    /// Noisy-detector settings tuned on the robot assembly task:
    /// kappa_anch = 0.5, kappa_inf = 0.8, conf+ = 0.05, conf- = 0.1.
    pub fn assembly() -> Self {
        Self {
            conf_inc: 0.05,
            conf_dec: 0.1,
            kappa_anch: 0.5,
            kappa_inf: 0.8,
            ..Self::benchmark()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "benchmark" => Some(Self::benchmark()),
            "assembly" => Some(Self::assembly()),
            _ => None,
        }
    }

    pub fn rule_for(&self, action: &str) -> Option<&ActionRule> {
        self.action_rules.iter().find(|r| r.action == action)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if self.tau.is_nan() || self.tau <= 0.0 {
            return Err(ConfigError::Invalid("tau must be > 0".into()));
        }
        if self.psi_mismatch.is_nan() || self.psi_mismatch < 1.0 {
            return Err(ConfigError::Invalid("psi_mismatch must be >= 1".into()));
        }
        if !open_unit(self.conf_inc) || !open_unit(self.conf_dec) {
            return Err(ConfigError::Invalid(
                "conf_inc and conf_dec must lie in (0, 1)".into(),
            ));
        }
        if !(self.kappa_anch > 0.0 && self.kappa_anch <= self.kappa_inf && self.kappa_inf <= 1.0) {
            return Err(ConfigError::Invalid(
                "thresholds must satisfy 0 < kappa_anch <= kappa_inf <= 1".into(),
            ));
        }
        if !(self.field_of_view.x > 0.0 && self.field_of_view.y > 0.0) {
            return Err(ConfigError::Invalid("field_of_view must be positive".into()));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: EngineConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses `text` on top of `base`: keys present in the file replace
    /// the base values, the rest are kept.
    pub fn overlay_toml(base: EngineConfig, text: &str) -> Result<Self, ConfigError> {
        let parse = |e: toml::de::Error| ConfigError::Parse(e.to_string());
        let overlay: toml::Table = toml::from_str(text).map_err(parse)?;
        let mut merged: toml::Table = toml::from_str(&base.to_toml()).map_err(parse)?;
        merged.extend(overlay);
        let cfg: EngineConfig = merged.try_into().map_err(parse)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("engine config is always representable as TOML")
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self::benchmark()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("invalid engine config: {0}")]
    Invalid(String),
    #[error("cannot parse engine config: {0}")]
    Parse(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid() {
        EngineConfig::benchmark().validate().unwrap();
        EngineConfig::assembly().validate().unwrap();
        let b = EngineConfig::benchmark();
        assert_eq!((b.tau, b.kappa_anch, b.conf_inc, b.conf_dec), (6500.0, 0.1, 0.1, 0.1));
        let a = EngineConfig::assembly();
        assert_eq!((a.kappa_anch, a.kappa_inf, a.conf_inc, a.conf_dec), (0.5, 0.8, 0.05, 0.1));
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let cfg = EngineConfig::assembly();
        assert_eq!(EngineConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);

        let partial = "tau = 9000.0\n[[action_rules]]\naction = \"grab\"\neffect = { attach = { child = 1, parent = 0 } }\n";
        let cfg = EngineConfig::from_toml(partial).unwrap();
        assert_eq!(cfg.tau, 9000.0);
        assert_eq!(cfg.kappa_anch, 0.1);
        assert_eq!(cfg.action_rules, vec![ActionRule::attach("grab", 1, 0)]);
    }

    #[test]
    fn overlay_keeps_unset_preset_fields() {
        let cfg = EngineConfig::overlay_toml(EngineConfig::assembly(), "tau = 900.0\n").unwrap();
        assert_eq!(cfg.tau, 900.0);
        assert_eq!(cfg.kappa_anch, 0.5);
        assert_eq!(cfg.conf_inc, 0.05);
        assert!(EngineConfig::overlay_toml(EngineConfig::assembly(), "bogus = 1\n").is_err());
    }

    #[test]
    fn rejects_bad_thresholds() {
        let bad = EngineConfig {
            kappa_inf: 0.05,
            ..EngineConfig::benchmark()
        };
        assert!(bad.validate().is_err());
        assert!(EngineConfig::from_toml("tau = -1.0").is_err());
        assert!(EngineConfig::from_toml("bogus = 1").is_err());
    }
}
