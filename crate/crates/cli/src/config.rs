//! TOML run configuration. Every field is optional; command-line flags
//! override the file and the file overrides built-in defaults.

use std::path::Path;

use serde::Deserialize;
use xtalk_core::sim::DriftSegment;
use xtalk_core::{Error, Result};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub analyze: AnalyzeSection,
    #[serde(default)]
    pub report: ReportSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub circuit: Option<String>,
    pub n: Option<u64>,
    pub m: Option<u64>,
    pub crosstalk_ba: Option<f64>,
    pub crosstalk_ab: Option<f64>,
    pub depolarizing: Option<f64>,
    pub input_dist: Option<Vec<f64>>,
    pub independent_inputs: Option<bool>,
    pub drift: Option<Vec<DriftSegment>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeSection {
    pub n_est: Option<usize>,
    pub alpha: Option<f64>,
    pub hypotheses: Option<Vec<String>>,
    pub regularize: Option<String>,
    pub tol: Option<f64>,
    pub max_iterations: Option<usize>,
    pub sort_trials: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportSection {
    pub alphas: Option<Vec<f64>>,
    pub bin_width: Option<f64>,
    pub device: Option<String>,
    pub qubit_pair: Option<String>,
    pub circuit: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections_and_drift() {
        let cfg: FileConfig = toml::from_str(
            r#"
            seed = 9
            [simulate]
            circuit = "cl"
            n = 1800
            drift = [
                { start = 0, end = 600, params = { crosstalk_b_to_a = 0.05, crosstalk_a_to_b = 0.3, depolarizing = 0.0 } },
                { start = 600, end = 1800, params = { crosstalk_b_to_a = 0.3, crosstalk_a_to_b = 0.0, depolarizing = 0.0 } },
            ]
            [analyze]
            hypotheses = ["ns", "owns-ba"]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(9));
        assert_eq!(cfg.simulate.drift.unwrap()[1].start, 600);
        assert_eq!(cfg.analyze.hypotheses.unwrap().len(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("[analyze]\nnest = 3\n").is_err());
    }
}
