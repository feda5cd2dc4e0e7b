//! TOML run configuration.
//!
//! ```toml
//! [model]          # any subset of the model coefficients
//! A = 0.3
//! sigma = 0.5
//!
//! [grid]
//! M = 2000
//!
//! [study]
//! seed = 42
//! n_paths = 400
//! N_list = [8, 32, 128, 512]
//! nash_N_list = [16, 64, 256]
//! workers = 0
//! responder_k = "recomputed"   # or "frozen"
//! gap_player = 0
//!
//! [checks]         # pass thresholds, see `Tolerances`
//! riccati_residual = 1e-6
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::harness::Tolerances;
use crate::nash::ResponderK;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelParams,
    pub grid: GridConfig,
    pub study: StudyConfig,
    pub checks: Tolerances,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    #[serde(rename = "M")]
    pub steps: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { steps: 2000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudyConfig {
    pub seed: u64,
    pub n_paths: usize,
    #[serde(rename = "N_list")]
    pub n_list: Vec<usize>,
    #[serde(rename = "nash_N_list")]
    pub nash_n_list: Vec<usize>,
    /// 0 uses one worker per core. Never affects results.
    pub workers: usize,
    pub responder_k: ResponderK,
    /// Minor player whose deviations are tested.
    pub gap_player: usize,
    pub overflow_cap: f64,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            seed: 42,
            n_paths: 400,
            n_list: vec![8, 32, 128, 512],
            nash_n_list: vec![16, 64, 256],
            workers: 0,
            responder_k: ResponderK::Recomputed,
            gap_player: 0,
            overflow_cap: crate::population::DEFAULT_OVERFLOW_CAP,
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default() {
        assert_eq!(parse_config("").unwrap(), RunConfig::default());
    }

    #[test]
    fn partial_sections_override() {
        let c = parse_config("[model]\nB0 = 0.0\n[grid]\nM = 50\n[study]\nresponder_k = \"frozen\"\nN_list = [4, 8]\n").unwrap();
        assert_eq!(c.model.b0, 0.0);
        assert_eq!(c.model.a, ModelParams::default().a);
        assert_eq!(c.grid.steps, 50);
        assert_eq!(c.study.responder_k, ResponderK::Frozen);
        assert_eq!(c.study.n_list, vec![4, 8]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(parse_config("[model]\nbeta = 1.0\n"), Err(Error::Config(_))));
        assert!(matches!(parse_config("[extra]\n"), Err(Error::Config(_))));
    }

    #[test]
    fn shipped_config_parses() {
        let text = include_str!("../../../../configs/default.toml");
        assert_eq!(parse_config(text).unwrap(), RunConfig::default());
    }
}
