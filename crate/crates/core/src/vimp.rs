//! Variable importance and its bootstrap distribution.
//!
//! Importance of `v` is the rise in out-of-bag error when every split on `v`
//! stops looking at the case and sends it to a random daughter instead.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::factorsplit::Daughter;
use crate::forest::{bootstrap_counts, Forest, OobContext};
use crate::rng::{derive_seed, stream_rng};

/// Stream reserved for drawing bootstrap resamples; variable streams use
/// the variable index.
const RESAMPLE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseMode {
    /// Splits on the variable send the case to a fair-coin daughter.
    #[default]
    RandomDaughter,
    /// The variable's column is permuted across cases before dropping.
    Permutation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableImportance {
    pub variable: String,
    pub importance: f64,
    /// Single-label variable; importance is reported as 0.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VimpResult {
    pub baseline_error: f64,
    pub variables: Vec<VariableImportance>,
}

impl VimpResult {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.variables
            .iter()
            .find(|v| v.variable == name)
            .map(|v| v.importance)
    }
}

/// Random-daughter importance for every variable, noised from streams of
/// the forest's own seed.
pub fn vimp(forest: &Forest, dataset: &Dataset) -> Result<VimpResult> {
    vimp_with(forest, dataset, NoiseMode::RandomDaughter, forest.params().seed)
}

pub fn vimp_with(forest: &Forest, dataset: &Dataset, mode: NoiseMode, seed: u64) -> Result<VimpResult> {
    let ctx = OobContext::new(forest, dataset)?;
    let cases: Vec<usize> = (0..dataset.len()).collect();
    importance_on(&ctx, &cases, mode, seed)
}

/// Importance over a list of case indices (repeats allowed). Variable `v`
/// is noised from stream `v` of `seed`.
fn importance_on(ctx: &OobContext<'_>, cases: &[usize], mode: NoiseMode, seed: u64) -> Result<VimpResult> {
    let forest = ctx.forest;
    let baseline: Vec<Option<f64>> = cases.iter().map(|&i| ctx.baseline_mortality(i)).collect();
    let baseline_error = ctx.error_for(cases, &baseline)?;
    let schema = forest.schema();

    let variables = (0..schema.len())
        .into_par_iter()
        .map(|v| {
            let variable = schema.variables[v].name.clone();
            let degenerate = schema.variables[v].is_degenerate();
            let users: Vec<bool> = forest.trees().iter().map(|t| t.uses_variable(v)).collect();
            if degenerate || !users.contains(&true) {
                return Ok(VariableImportance {
                    variable,
                    importance: 0.0,
                    degenerate,
                });
            }
            let mut rng = stream_rng(seed, v as u64);
            let noised = match mode {
                NoiseMode::RandomDaughter => cases
                    .iter()
                    .map(|&i| {
                        ctx.mortality(i, |b| {
                            if users[b] {
                                forest.trees()[b].route_case(&ctx.codes, i, |var| {
                                    (var == v).then(|| coin(&mut rng))
                                })
                            } else {
                                ctx.routes[b][i] as usize
                            }
                        })
                    })
                    .collect::<Vec<_>>(),
                NoiseMode::Permutation => {
                    let mut column = ctx.codes[v].to_vec();
                    column.shuffle(&mut rng);
                    let mut codes = ctx.codes.clone();
                    codes[v] = &column;
                    cases
                        .iter()
                        .map(|&i| {
                            ctx.mortality(i, |b| {
                                if users[b] {
                                    forest.trees()[b].route_case(&codes, i, |_| None)
                                } else {
                                    ctx.routes[b][i] as usize
                                }
                            })
                        })
                        .collect()
                }
            };
            Ok(VariableImportance {
                variable,
                importance: ctx.error_for(cases, &noised)? - baseline_error,
                degenerate,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VimpResult {
        baseline_error,
        variables,
    })
}

fn coin<R: Rng + ?Sized>(rng: &mut R) -> Daughter {
    if rng.random_bool(0.5) {
        Daughter::Left
    } else {
        Daughter::Right
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resample {
    #[default]
    Bootstrap,
    /// Every replicate reuses the data as is.
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseStreams {
    /// Replicate `r` noises from seed `derive_seed(seed, r)`.
    #[default]
    PerReplicate,
    /// All replicates noise from `seed` itself.
    Fixed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    pub level: f64,
    pub seed: u64,
    pub mode: NoiseMode,
    pub resample: Resample,
    pub noise_streams: NoiseStreams,
}

impl BootstrapConfig {
    pub fn new(replicates: usize, level: f64, seed: u64) -> Self {
        Self {
            replicates,
            level,
            seed,
            mode: NoiseMode::RandomDaughter,
            resample: Resample::Bootstrap,
            noise_streams: NoiseStreams::PerReplicate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VimpBootstrapDistribution {
    pub names: Vec<String>,
    pub degenerate: Vec<bool>,
    /// `replicates[v][r]`: importance of variable `v` in replicate `r`.
    pub replicates: Vec<Vec<f64>>,
    pub level: f64,
}

/// Resample the data `R` times, drop each resample down the fixed forest
/// and compute importance. Each case keeps its own out-of-bag trees; the
/// baseline error is recomputed per replicate.
pub fn bootstrap_vimp(
    forest: &Forest,
    dataset: &Dataset,
    replicates: usize,
    level: f64,
    seed: u64,
) -> Result<VimpBootstrapDistribution> {
    bootstrap_vimp_with(forest, dataset, &BootstrapConfig::new(replicates, level, seed))
}

pub fn bootstrap_vimp_with(
    forest: &Forest,
    dataset: &Dataset,
    config: &BootstrapConfig,
) -> Result<VimpBootstrapDistribution> {
    if config.replicates == 0 {
        return Err(invalid("at least one bootstrap replicate is required"));
    }
    check_level(config.level)?;
    let ctx = OobContext::new(forest, dataset)?;
    let n = dataset.len();
    let runs = (0..config.replicates)
        .into_par_iter()
        .map(|r| {
            let replicate_seed = derive_seed(config.seed, r as u64);
            let cases: Vec<usize> = match config.resample {
                Resample::Identity => (0..n).collect(),
                Resample::Bootstrap => {
                    let counts = bootstrap_counts(n, &mut stream_rng(replicate_seed, RESAMPLE_STREAM));
                    counts
                        .iter()
                        .enumerate()
                        .flat_map(|(i, &k)| std::iter::repeat_n(i, k as usize))
                        .collect()
                }
            };
            let noise_seed = match config.noise_streams {
                NoiseStreams::PerReplicate => replicate_seed,
                NoiseStreams::Fixed => config.seed,
            };
            importance_on(&ctx, &cases, config.mode, noise_seed)
        })
        .collect::<Result<Vec<_>>>()?;

    let schema = forest.schema();
    let replicates = (0..schema.len())
        .map(|v| runs.iter().map(|run| run.variables[v].importance).collect())
        .collect();
    Ok(VimpBootstrapDistribution {
        names: schema.names(),
        degenerate: schema.variables.iter().map(|v| v.is_degenerate()).collect(),
        replicates,
        level: config.level,
    })
}

fn check_level(level: f64) -> Result<()> {
    if !(level > 0.0 && level < 1.0) {
        return Err(invalid(format!("interval level must lie in (0, 1), got {level}")));
    }
    Ok(())
}

/// Empirical quantile with linear interpolation between order statistics:
/// position `h = (n - 1) p` in the sorted sample.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    quantile_sorted(&sorted, p)
}

fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl VimpBootstrapDistribution {
    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn mean(&self, v: usize) -> f64 {
        let r = &self.replicates[v];
        r.iter().sum::<f64>() / r.len() as f64
    }

    /// Central interval at the distribution's own level.
    pub fn interval(&self, v: usize) -> (f64, f64) {
        self.interval_at(v, self.level)
    }

    /// Central `level` interval: quantiles `(1 - level)/2` and `(1 + level)/2`.
    pub fn interval_at(&self, v: usize, level: f64) -> (f64, f64) {
        let mut sorted = self.replicates[v].clone();
        sorted.sort_by(f64::total_cmp);
        (
            quantile_sorted(&sorted, (1.0 - level) / 2.0),
            quantile_sorted(&sorted, (1.0 + level) / 2.0),
        )
    }

    pub fn rows(&self, granularity: Option<usize>, nsplit: usize) -> Vec<VimpRow> {
        (0..self.names.len())
            .map(|v| {
                let (lower, upper) = self.interval(v);
                VimpRow {
                    variable: self.names[v].clone(),
                    mean: self.mean(v),
                    lower,
                    upper,
                    level: self.level,
                    granularity,
                    nsplit,
                }
            })
            .collect()
    }
}

/// Selection threshold: the `1 - alpha` quantile of all replicate values of
/// the named noise variables pooled together.
pub fn noise_threshold(dist: &VimpBootstrapDistribution, noise: &[String], alpha: f64) -> Result<f64> {
    check_level(alpha)?;
    let mut pool = Vec::new();
    for name in noise {
        let v = dist
            .index_of(name)
            .ok_or_else(|| Error::MissingColumn(name.clone()))?;
        pool.extend_from_slice(&dist.replicates[v]);
    }
    if pool.is_empty() {
        return Err(invalid("no noise variables to pool"));
    }
    Ok(quantile(&pool, 1.0 - alpha))
}

/// Variables whose mean importance exceeds `threshold`.
pub fn select(dist: &VimpBootstrapDistribution, threshold: f64) -> Vec<String> {
    (0..dist.names.len())
        .filter(|&v| dist.mean(v) > threshold)
        .map(|v| dist.names[v].clone())
        .collect()
}

/// One line of the importance interval table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VimpRow {
    pub variable: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    /// Labels per discretized variable, empty when the data were used as is.
    pub granularity: Option<usize>,
    pub nsplit: usize,
}

pub fn write_vimp_csv(rows: &[VimpRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
