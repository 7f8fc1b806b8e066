//! JSON config documents.
//!
//! ```json
//! {"sensors": 2, "processes": 2, "lambda": [1, 1], "mu": 2,
//!  "correlation": [[1, 0.5], [0.5, 1]], "preemption": [1, 1],
//!  "sim": {"horizon": 1e6, "seed": 7, "replications": 10}}
//! ```
//!
//! Unknown keys are rejected at every level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Coverage, PreemptionPolicy, SystemConfig};
use crate::sim::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    pub sensors: usize,
    pub processes: usize,
    pub lambda: Vec<f64>,
    pub mu: f64,
    pub correlation: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preemption: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimBlock>,
}

/// Simulation settings; omitted fields fall back to [`SimConfig::default`],
/// and an omitted warmup is 1% of the horizon.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warmup: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replications: Option<u32>,
}

impl SimBlock {
    pub fn resolve(&self) -> SimConfig {
        let base = SimConfig::default();
        let horizon = self.horizon.unwrap_or(base.horizon);
        let sim = SimConfig::new(
            horizon,
            self.seed.unwrap_or(base.seed),
            self.replications.unwrap_or(base.replications),
        );
        match self.warmup {
            Some(w) => sim.with_warmup(w),
            None => sim,
        }
    }
}

impl ConfigDocument {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_config(config: &SystemConfig, policy: Option<&PreemptionPolicy>) -> Self {
        ConfigDocument {
            sensors: config.n_sensors(),
            processes: config.n_processes(),
            lambda: config.arrival_rates().to_vec(),
            mu: config.service_rate(),
            correlation: config.correlation_rows(),
            preemption: policy.map(|p| p.probs().to_vec()),
            sim: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config document serializes")
    }

    pub fn system_config(&self, coverage: Coverage) -> Result<SystemConfig> {
        SystemConfig::with_coverage(
            self.sensors,
            self.processes,
            self.lambda.clone(),
            self.mu,
            self.correlation.clone(),
            coverage,
        )
    }

    /// The stated policy, or full preemption when absent.
    pub fn policy(&self) -> Result<PreemptionPolicy> {
        let policy = match &self.preemption {
            Some(p) => PreemptionPolicy::new(p.clone())?,
            None => PreemptionPolicy::full(self.sensors),
        };
        if policy.len() != self.sensors {
            return Err(Error::DimensionMismatch {
                what: "preemption vector",
                expected: self.sensors,
                actual: policy.len(),
            });
        }
        Ok(policy)
    }

    pub fn sim_config(&self) -> SimConfig {
        self.sim.unwrap_or_default().resolve()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG3A: &str = r#"{"sensors": 2, "processes": 2, "lambda": [1, 1], "mu": 2,
        "correlation": [[1, 0.5], [0.5, 1]], "preemption": [0.5, 0.5],
        "sim": {"horizon": 1000, "seed": 3}}"#;

    #[test]
    fn parses_full_document() {
        let doc = ConfigDocument::from_json(FIG3A).unwrap();
        let config = doc.system_config(Coverage::Strict).unwrap();
        assert_eq!(config.correlation(0, 1), 0.5);
        assert_eq!(doc.policy().unwrap().probs(), &[0.5, 0.5]);
        let sim = doc.sim_config();
        assert_eq!(sim.horizon, 1000.0);
        assert_eq!(sim.warmup, 10.0);
        assert_eq!(sim.seed, 3);
        assert_eq!(sim.replications, 1);
    }

    #[test]
    fn rejects_unknown_keys() {
        let bad = r#"{"sensors": 1, "processes": 1, "lambda": [1], "mu": 1,
            "correlation": [[1]], "extra": 0}"#;
        assert!(matches!(
            ConfigDocument::from_json(bad),
            Err(Error::Parse(_))
        ));
        let bad_sim = r#"{"sensors": 1, "processes": 1, "lambda": [1], "mu": 1,
            "correlation": [[1]], "sim": {"length": 5}}"#;
        assert!(matches!(
            ConfigDocument::from_json(bad_sim),
            Err(Error::Parse(_))
        ));
    }

    #[test]
    fn missing_policy_means_full_preemption() {
        let doc = ConfigDocument::from_json(
            r#"{"sensors": 1, "processes": 1, "lambda": [1], "mu": 1, "correlation": [[1]]}"#,
        )
        .unwrap();
        assert_eq!(doc.policy().unwrap().probs(), &[1.0]);
    }

    #[test]
    fn policy_length_checked() {
        let doc = ConfigDocument::from_json(
            r#"{"sensors": 2, "processes": 1, "lambda": [1, 1], "mu": 1,
                "correlation": [[1], [1]], "preemption": [1]}"#,
        )
        .unwrap();
        assert!(matches!(doc.policy(), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn round_trip() {
        let doc = ConfigDocument::from_json(FIG3A).unwrap();
        let config = doc.system_config(Coverage::Strict).unwrap();
        let back = ConfigDocument::from_config(&config, Some(&doc.policy().unwrap()));
        let again = ConfigDocument::from_json(&back.to_json()).unwrap();
        assert_eq!(again.system_config(Coverage::Strict).unwrap(), config);
    }
}
