//! The batch commands. Each returns the files it wrote.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use rayon::prelude::*;
use rsf_core::estimators::StepFunction;
use rsf_core::lab::{self, ConvergenceConfig, PiecewiseHazard, SyntheticTruth};
use rsf_core::rng::stream_rng;
use rsf_core::vimp::{bootstrap_vimp, noise_threshold, VimpBootstrapDistribution, VimpRow};
use rsf_core::{fit, oob_error, predict_ensemble, Dataset, Forest, RawTable};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::output::{write_csv_rows, write_json, write_table};

/// Stream of the master seed used to draw injected noise columns.
const NOISE_STREAM: u64 = 1 << 32;

/// A fitted forest plus what is needed to read new data the same way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub time_col: String,
    pub status_col: String,
    /// Labels per discretized column, `None` when nothing was discretized.
    pub granularity: Option<usize>,
    pub forest: Forest,
}

impl ModelFile {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading model {}", path.display()))?;
        let model: ModelFile = serde_json::from_str(&text).with_context(|| format!("parsing model {}", path.display()))?;
        // re-check tree structure and in-bag counts
        let forest = Forest::from_json(&serde_json::to_string(&model.forest)?)?;
        Ok(Self { forest, ..model })
    }
}

/// Read the configured CSV and discretize its continuous columns to
/// `granularity` labels.
pub fn load_dataset(config: &ExperimentConfig, granularity: usize) -> anyhow::Result<(Dataset, Option<usize>)> {
    let path = config.data_path()?;
    let raw = RawTable::read_csv(path).with_context(|| format!("reading {}", path.display()))?;
    let data = Dataset::from_table(&raw, &config.csv_options())?;
    discretize(data, granularity)
}

fn discretize(data: Dataset, granularity: usize) -> anyhow::Result<(Dataset, Option<usize>)> {
    if data.pending_names().is_empty() {
        Ok((data, None))
    } else {
        Ok((data.discretize_all(granularity)?, Some(granularity)))
    }
}

#[derive(Debug, Serialize)]
struct FitSummary {
    oob_error: f64,
    n_cases: usize,
    n_events: usize,
    n_trees: usize,
    nsplit: usize,
    granularity: Option<usize>,
}

/// Fit a forest; write `model.json` and `fit.json` (OOB error and sizes).
pub fn cmd_fit(config: &ExperimentConfig) -> anyhow::Result<Vec<PathBuf>> {
    let (data, granularity) = load_dataset(config, config.granularity[0])?;
    let params = config.forest_params(config.nsplit[0]);
    let forest = fit(&data, &params)?;
    let summary = FitSummary {
        oob_error: oob_error(&forest, &data)?,
        n_cases: data.len(),
        n_events: data.n_events(),
        n_trees: params.n_trees,
        nsplit: params.nsplit,
        granularity,
    };
    let model = ModelFile {
        time_col: config.time_col.clone(),
        status_col: config.status_col.clone(),
        granularity,
        forest,
    };
    let model_path = config.out_dir.join("model.json");
    let fit_path = config.out_dir.join("fit.json");
    write_json(&model_path, &model)?;
    write_json(&fit_path, &summary)?;
    Ok(vec![model_path, fit_path])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasePrediction {
    pub case: usize,
    pub survival: StepFunction,
    pub chf: StepFunction,
}

/// Ensemble survival and cumulative hazard for every row of the data file;
/// written to `predictions.json`.
pub fn cmd_predict(config: &ExperimentConfig, model: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let model = ModelFile::load(model)?;
    let path = config.data_path()?;
    let raw = RawTable::read_csv(path).with_context(|| format!("reading {}", path.display()))?;
    let codes = raw.encode_features(model.forest.schema())?;
    let n = raw.rows.len();
    let predictions = (0..n)
        .map(|i| {
            let x: Vec<u32> = codes.iter().map(|c| c[i]).collect();
            let (survival, chf) = predict_ensemble(&model.forest, &x)?;
            Ok(CasePrediction { case: i, survival, chf })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let out = config.out_dir.join("predictions.json");
    write_json(&out, &predictions)?;
    Ok(vec![out])
}

/// Bootstrap importance intervals, written to `vimp.csv`. Reuses `model`
/// when given (the data must then be its training file), otherwise fits.
pub fn cmd_vimp(config: &ExperimentConfig, model: Option<&Path>) -> anyhow::Result<Vec<PathBuf>> {
    let (forest, data, granularity) = match model {
        Some(path) => {
            let model = ModelFile::load(path)?;
            let data_path = config.data_path()?;
            let raw = RawTable::read_csv(data_path).with_context(|| format!("reading {}", data_path.display()))?;
            let data = Dataset::from_table_with_schema(&raw, &model.time_col, &model.status_col, model.forest.schema())?;
            (model.forest, data, model.granularity)
        }
        None => {
            let (data, granularity) = load_dataset(config, config.granularity[0])?;
            (fit(&data, &config.forest_params(config.nsplit[0]))?, data, granularity)
        }
    };
    let dist = bootstrap_vimp(&forest, &data, config.boot_reps, config.level, config.seed)?;
    let out = config.out_dir.join("vimp.csv");
    write_csv_rows(&out, &dist.rows(granularity, forest.params().nsplit))?;
    Ok(vec![out])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRow {
    pub granularity: usize,
    pub nsplit: usize,
    pub oob_error: f64,
}

struct SweepCell {
    error: ErrorRow,
    vimp: Option<VimpBootstrapDistribution>,
}

fn sweep(config: &ExperimentConfig, base: &Dataset, nsplits: &[usize], vimp_nsplit: usize) -> anyhow::Result<Vec<SweepCell>> {
    let cells: Vec<(usize, usize)> = config
        .granularity
        .iter()
        .flat_map(|&l| nsplits.iter().map(move |&s| (l, s)))
        .collect();
    cells
        .par_iter()
        .map(|&(granularity, nsplit)| {
            let data = base.clone().discretize_all(granularity)?;
            let forest = fit(&data, &config.forest_params(nsplit))?;
            let vimp = if nsplit == vimp_nsplit {
                Some(bootstrap_vimp(&forest, &data, config.boot_reps, config.level, config.seed)?)
            } else {
                None
            };
            Ok(SweepCell {
                error: ErrorRow {
                    granularity,
                    nsplit,
                    oob_error: oob_error(&forest, &data)?,
                },
                vimp,
            })
        })
        .collect()
}

fn load_undiscretized(config: &ExperimentConfig) -> anyhow::Result<Dataset> {
    let path = config.data_path()?;
    let raw = RawTable::read_csv(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Dataset::from_table(&raw, &config.csv_options())?)
}

/// OOB error over the granularity x nsplit grid (`sweep_error.csv`) and
/// bootstrap importance at the largest nsplit (`sweep_vimp.csv`).
pub fn cmd_granularity_sweep(config: &ExperimentConfig) -> anyhow::Result<Vec<PathBuf>> {
    let base = load_undiscretized(config)?;
    if base.pending_names().is_empty() {
        bail!("dataset has no continuous columns to discretize");
    }
    let cells = sweep(config, &base, &config.nsplit, config.largest_nsplit())?;
    let errors: Vec<ErrorRow> = cells.iter().map(|c| c.error.clone()).collect();
    let vimp: Vec<VimpRow> = cells
        .iter()
        .filter_map(|c| c.vimp.as_ref().map(|d| d.rows(Some(c.error.granularity), c.error.nsplit)))
        .flatten()
        .collect();
    let error_path = config.out_dir.join("sweep_error.csv");
    let vimp_path = config.out_dir.join("sweep_vimp.csv");
    write_csv_rows(&error_path, &errors)?;
    write_csv_rows(&vimp_path, &vimp)?;
    Ok(vec![error_path, vimp_path])
}

/// Importance row with noise bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseVimpRow {
    pub variable: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub granularity: usize,
    pub nsplit: usize,
    pub noise: bool,
    pub threshold: f64,
    pub selected: bool,
}

/// Names of the columns [`Dataset::inject_noise`] adds.
pub fn noise_names(spec: &crate::config::NoiseSpec) -> Vec<String> {
    (1..=spec.continuous)
        .map(|k| format!("c{k}"))
        .chain((1..=spec.discrete).map(|k| format!("d{k}")))
        .collect()
}

/// Inject noise columns, then bootstrap importance at the largest nsplit for
/// each granularity (`noise_vimp.csv`), with the pooled-noise threshold.
pub fn cmd_noise_vimp(config: &ExperimentConfig) -> anyhow::Result<Vec<PathBuf>> {
    let noise = noise_names(&config.noise);
    if noise.is_empty() {
        bail!("noise-vimp needs at least one noise variable");
    }
    let base = load_undiscretized(config)?.inject_noise(
        config.noise.continuous,
        config.noise.discrete,
        &mut stream_rng(config.seed, NOISE_STREAM),
    )?;
    let nsplit = config.largest_nsplit();
    let cells = sweep(config, &base, &[nsplit], nsplit)?;
    let mut rows = Vec::new();
    for cell in &cells {
        let dist = cell.vimp.as_ref().expect("every cell runs importance");
        let threshold = noise_threshold(dist, &noise, config.alpha)?;
        for (v, row) in dist.rows(Some(cell.error.granularity), nsplit).into_iter().enumerate() {
            rows.push(NoiseVimpRow {
                noise: noise.contains(&row.variable),
                selected: dist.mean(v) > threshold,
                variable: row.variable,
                mean: row.mean,
                lower: row.lower,
                upper: row.upper,
                level: row.level,
                granularity: cell.error.granularity,
                nsplit,
                threshold,
            });
        }
    }
    let out = config.out_dir.join("noise_vimp.csv");
    write_csv_rows(&out, &rows)?;
    Ok(vec![out])
}

/// Write a synthetic 17-covariate PBC-like table.
pub fn cmd_synth_pbc(n: usize, seed: u64, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    if n == 0 {
        bail!("n must be positive");
    }
    let table = lab::pbc_like(n, &mut stream_rng(seed, 0));
    write_table(out, &table)?;
    Ok(vec![out.to_path_buf()])
}

/// Tree and forest sup-error against the eight-atom synthetic truth
/// (`convergence.csv`, plus the truth as `truth.json`).
pub fn cmd_convergence(
    config: &ExperimentConfig,
    sizes: &[usize],
    seeds: &[u64],
    t_max: f64,
) -> anyhow::Result<Vec<PathBuf>> {
    let truth = SyntheticTruth::eight_atoms();
    let base = config.forest_params(config.nsplit[0]);
    let lab_config = ConvergenceConfig {
        tree: rsf_core::ForestParams { n_trees: 1, ..base },
        forest: base,
        t_max,
        grid: 200,
    };
    let rows = lab::convergence_experiment(&truth, sizes, &lab_config, seeds)?;
    let out = config.out_dir.join("convergence.csv");
    let truth_path = config.out_dir.join("truth.json");
    write_csv_rows(&out, &rows)?;
    write_json(&truth_path, &truth)?;
    Ok(vec![out, truth_path])
}

#[derive(Debug, Serialize)]
struct StaircaseRow {
    steps: usize,
    error: f64,
}

/// Staircase approximation of an exponential survival curve on
/// `[0, s_max]`; the error per step count goes to `staircase.csv`.
pub fn cmd_staircase(config: &ExperimentConfig, rate: f64, s_max: f64, eps: f64) -> anyhow::Result<Vec<PathBuf>> {
    let truth = SyntheticTruth::eight_atoms();
    let curve = PiecewiseHazard::constant(rate)?;
    let result = lab::staircase_approximation(&truth.schema, &truth.atoms[0].x, &curve, s_max, eps)?;
    let rows: Vec<StaircaseRow> = result
        .history
        .iter()
        .map(|&(steps, error)| StaircaseRow { steps, error })
        .collect();
    let out = config.out_dir.join("staircase.csv");
    write_csv_rows(&out, &rows)?;
    Ok(vec![out])
}
