//! Experiment configuration: JSON file defaults overridden by flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rsf_core::{CsvOptions, ForestParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Standard-normal columns `c1, c2, ...`, discretized like the data.
    pub continuous: usize,
    /// Fair-coin binary columns `d1, d2, ...`.
    pub discrete: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            continuous: 25,
            discrete: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: Option<PathBuf>,
    pub time_col: String,
    pub status_col: String,
    /// Numeric columns to read as factors whatever their level count.
    pub factor_columns: Vec<String>,
    /// Numeric columns with at most this many distinct values are factors.
    pub max_factor_levels: usize,
    /// Labels per discretized continuous column; single-run commands use
    /// the first entry.
    pub granularity: Vec<usize>,
    /// Candidate pairs per variable; single-run commands use the first entry.
    pub nsplit: Vec<usize>,
    pub n_trees: usize,
    pub nodesize: usize,
    pub mtry: Option<usize>,
    pub seed: u64,
    pub boot_reps: usize,
    pub level: f64,
    /// Tail probability for the noise-based selection threshold.
    pub alpha: f64,
    pub noise: NoiseSpec,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            data: None,
            time_col: "time".into(),
            status_col: "status".into(),
            factor_columns: Vec::new(),
            max_factor_levels: 5,
            granularity: vec![2, 5, 10, 20, 30],
            nsplit: vec![5, 10, 20, 50, 1024],
            n_trees: 250,
            nodesize: 3,
            mtry: None,
            seed: 0,
            boot_reps: 100,
            level: 0.68,
            alpha: 0.05,
            noise: NoiseSpec::default(),
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.granularity.is_empty() || self.nsplit.is_empty() {
            bail!("granularity and nsplit lists must be non-empty");
        }
        if let Some(&l) = self.granularity.iter().find(|&&l| l < 2) {
            bail!("granularity must be at least 2, got {l}");
        }
        if self.n_trees == 0 {
            bail!("ntree must be at least 1");
        }
        if self.nodesize == 0 {
            bail!("nodesize must be at least 1");
        }
        if self.mtry == Some(0) {
            bail!("mtry must be at least 1");
        }
        if self.boot_reps == 0 {
            bail!("boot-reps must be at least 1");
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            bail!("level must lie in (0, 1), got {}", self.level);
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            bail!("alpha must lie in (0, 1), got {}", self.alpha);
        }
        Ok(())
    }

    pub fn data_path(&self) -> anyhow::Result<&Path> {
        self.data.as_deref().context("no dataset given (use --data)")
    }

    pub fn csv_options(&self) -> CsvOptions {
        CsvOptions {
            time_col: self.time_col.clone(),
            status_col: self.status_col.clone(),
            factor_columns: self.factor_columns.clone(),
            max_factor_levels: self.max_factor_levels,
        }
    }

    pub fn forest_params(&self, nsplit: usize) -> ForestParams {
        ForestParams {
            n_trees: self.n_trees,
            mtry: self.mtry,
            nsplit,
            min_events: self.nodesize,
            seed: self.seed,
        }
    }

    pub fn largest_nsplit(&self) -> usize {
        self.nsplit.iter().copied().max().unwrap_or(0)
    }
}
