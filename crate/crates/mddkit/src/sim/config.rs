//! Simulation configuration: the vehicle roster, the mandatory RNG seed, and
//! the task-duration and performance models. No wall-clock entropy anywhere.

use super::conformance::ConformanceMode;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RosterEntry {
    pub class: String,
    pub id: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum PerformanceModel {
    /// Every vehicle reports this value.
    Fixed { value: f64 },
    /// Per-vehicle whole-number draw from [low, high], inclusive.
    SeededUniform { low: u32, high: u32 },
}

impl Default for PerformanceModel {
    fn default() -> Self {
        PerformanceModel::SeededUniform { low: 60, high: 100 }
    }
}

/// How per-vehicle performances collapse into the fleet metric.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationKind {
    #[default]
    Mean,
    Min,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub roster: Vec<RosterEntry>,
    pub seed: u64,
    /// Fixed task duration in ticks; `None` draws per vehicle from [1, 5]
    /// using the seeded RNG.
    pub task_duration: Option<u32>,
    pub performance: PerformanceModel,
    /// Whether the fleet-discovery exchange runs before planning.
    pub discovery: bool,
    pub conformance_mode: ConformanceMode,
    pub aggregation: AggregationKind,
    /// Vehicle ids taken out of service before the mission starts. An
    /// offline vehicle never becomes available again on its own.
    pub offline: Vec<String>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            roster: vec![
                RosterEntry { class: "UAV".into(), id: "UAV-1".into() },
                RosterEntry { class: "UGV".into(), id: "UGV-1".into() },
                RosterEntry { class: "USV".into(), id: "USV-1".into() },
            ],
            seed: 42,
            task_duration: None,
            performance: PerformanceModel::default(),
            discovery: true,
            conformance_mode: ConformanceMode::Strict,
            aggregation: AggregationKind::Mean,
            offline: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("roster must not be empty")]
    EmptyRoster,
    #[error("duplicate roster id `{0}`")]
    DuplicateRosterId(String),
    #[error("performance bounds must satisfy 0 <= low <= high <= 100, got [{low}, {high}]")]
    PerformanceBounds { low: u32, high: u32 },
    #[error("fixed performance {0} is outside [0, 100]")]
    PerformanceValue(f64),
    #[error("task duration must be at least 1 tick")]
    ZeroDuration,
    #[error("cannot parse config: {0}")]
    Parse(String),
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.roster.is_empty() {
            return Err(ConfigError::EmptyRoster);
        }
        let mut seen = std::collections::BTreeSet::new();
        for entry in &self.roster {
            if !seen.insert(&entry.id) {
                return Err(ConfigError::DuplicateRosterId(entry.id.clone()));
            }
        }
        match self.performance {
            PerformanceModel::SeededUniform { low, high } => {
                if low > high || high > 100 {
                    return Err(ConfigError::PerformanceBounds { low, high });
                }
            }
            PerformanceModel::Fixed { value } => {
                if !(0.0..=100.0).contains(&value) {
                    return Err(ConfigError::PerformanceValue(value));
                }
            }
        }
        if self.task_duration == Some(0) {
            return Err(ConfigError::ZeroDuration);
        }
        Ok(())
    }

    /// Reads a config from TOML or JSON, by content.
    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let config: SimConfig = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?
        } else {
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixture_toml_parses() {
        let path = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR"))
            .join("../../fixtures/sim/mission.toml");
        let config = SimConfig::from_text(&std::fs::read_to_string(path).unwrap()).unwrap();
        assert_eq!(config.seed, 42);
        assert_eq!(config.roster.len(), 3);
        assert!(config.discovery);
        assert_eq!(config.performance, PerformanceModel::SeededUniform { low: 60, high: 100 });
    }

    #[test]
    fn json_config_parses_too() {
        let config = SimConfig::from_text(r#"{ "seed": 7, "roster": [{"class":"UAV","id":"u1"}] }"#)
            .unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.roster.len(), 1);
    }

    #[test]
    fn empty_roster_is_rejected() {
        let config = SimConfig { roster: vec![], ..Default::default() };
        assert!(matches!(config.validate(), Err(ConfigError::EmptyRoster)));
    }

    #[test]
    fn inverted_performance_bounds_are_rejected() {
        let config = SimConfig {
            performance: PerformanceModel::SeededUniform { low: 90, high: 10 },
            ..Default::default()
        };
        assert!(matches!(config.validate(), Err(ConfigError::PerformanceBounds { .. })));
    }

    #[test]
    fn duplicate_roster_ids_are_rejected() {
        let config = SimConfig {
            roster: vec![
                RosterEntry { class: "UAV".into(), id: "u1".into() },
                RosterEntry { class: "UGV".into(), id: "u1".into() },
            ],
            ..Default::default()
        };
        assert!(matches!(config.validate(), Err(ConfigError::DuplicateRosterId(_))));
    }
}
