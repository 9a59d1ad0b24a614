//! Configuration file for the command line tool (TOML or JSON).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::csv_io::Schema;
use crate::error::{Error, Result};
use crate::sim::SimSetting;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub seed: Option<u64>,
    pub alpha: Option<f64>,
    pub level: Option<f64>,
    pub threads: Option<usize>,
    pub out_dir: Option<PathBuf>,
    pub input: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub schema: Option<Schema>,
    pub profile: Option<ProfileConfig>,
    /// FPR values for pointwise summaries.
    pub fpr: Option<Vec<f64>>,
    /// Number of points of the default FPR grid.
    pub grid: Option<usize>,
    pub power: Option<PowerConfig>,
    pub simulation: Option<SimulationConfig>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub group: Option<String>,
    pub covariates: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub beta: f64,
    pub settings: Vec<u8>,
    pub groups: Vec<usize>,
    pub fpr: Vec<f64>,
    pub auc: bool,
    pub raters: u32,
    pub levels: usize,
    pub psi: f64,
    pub phi: f64,
    pub x1: f64,
    pub k0_fraction: f64,
    pub tau_sim: Option<Vec<f64>>,
    /// Rater allocations such as `"4:2:1:4"`, evaluated under `ratio_setting`.
    pub ratios: Vec<String>,
    pub ratio_setting: u8,
    pub cap: u64,
}

impl Default for PowerConfig {
    fn default() -> Self {
        Self {
            beta: 0.2,
            settings: vec![2, 3, 4],
            groups: (3..=7).collect(),
            fpr: vec![0.3, 0.5, 0.7],
            auc: true,
            raters: 10,
            levels: 7,
            psi: 0.5,
            phi: 1.5,
            x1: 0.5,
            k0_fraction: 0.5,
            tau_sim: None,
            ratios: Vec::new(),
            ratio_setting: 4,
            cap: ordroc_core::power::DEFAULT_CAP,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Generate,
    Consistency,
    Coverage,
    Type1,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Roc,
    Auc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub experiment: Experiment,
    pub replications: u64,
    /// Items per rater for each cell; the design's `k` when empty.
    pub ks: Vec<u64>,
    /// Group counts for the Type I experiment; the design's `groups` when empty.
    pub groups: Vec<usize>,
    pub t: f64,
    pub metric: MetricKind,
    pub beta: f64,
    pub design: SimSetting,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Consistency,
            replications: 1000,
            ks: Vec::new(),
            groups: Vec::new(),
            t: 0.3,
            metric: MetricKind::Roc,
            beta: 0.2,
            design: SimSetting::default(),
        }
    }
}

impl CliConfig {
    /// Format chosen by extension: `.json` or TOML otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_str(&text)?)
        } else {
            Ok(toml::from_str(&text)?)
        }
    }
}

/// Parses `"4:2:1:4"`.
pub fn parse_ratio(s: &str) -> Result<Vec<u32>> {
    s.split(':')
        .map(|p| {
            p.trim()
                .parse::<u32>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Usage(format!("ratio `{s}` must be positive integers separated by `:`")))
        })
        .collect()
}
