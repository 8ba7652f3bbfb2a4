//! Bootstrap ensembles of survival trees, ensemble and out-of-bag
//! prediction, and the out-of-bag concordance error.

use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FactorSchema};
use crate::error::{invalid, Error, Result};
use crate::estimators::StepFunction;
use crate::rng::stream_rng;
use crate::tree::{grow_tree, SurvivalTree, TrainingData, TreeParams};

/// Bootstraps redrawn this many times when they carry fewer than `d0` events.
pub const MAX_BOOTSTRAP_RETRIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate variables per node; `None` uses `ceil(sqrt(d))`.
    pub mtry: Option<usize>,
    pub nsplit: usize,
    pub min_events: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 250,
            mtry: None,
            nsplit: 10,
            min_events: 3,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn tree_params(&self, n_variables: usize) -> TreeParams {
        let mtry = self
            .mtry
            .unwrap_or_else(|| (n_variables as f64).sqrt().ceil() as usize)
            .max(1);
        TreeParams {
            mtry,
            nsplit: self.nsplit,
            min_events: self.min_events,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    params: ForestParams,
    schema: FactorSchema,
    /// `inbag[b][i]`: times case `i` was drawn into tree `b`'s bootstrap.
    inbag: Vec<Vec<u32>>,
    trees: Vec<SurvivalTree>,
}

impl Forest {
    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn schema(&self) -> &FactorSchema {
        &self.schema
    }

    pub fn trees(&self) -> &[SurvivalTree] {
        &self.trees
    }

    pub fn inbag_counts(&self) -> &[Vec<u32>] {
        &self.inbag
    }

    pub fn n_cases(&self) -> usize {
        self.inbag.first().map_or(0, Vec::len)
    }

    pub fn is_oob(&self, tree: usize, case: usize) -> bool {
        self.inbag[tree][case] == 0
    }

    /// Trees for which `case` is out of bag.
    pub fn oob_trees(&self, case: usize) -> Vec<usize> {
        (0..self.trees.len()).filter(|&b| self.is_oob(b, case)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let forest: Forest = serde_json::from_str(json)?;
        forest.validate()?;
        Ok(forest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn validate(&self) -> Result<()> {
        if self.trees.len() != self.inbag.len() || self.trees.is_empty() {
            return Err(Error::Model("one in-bag vector per tree is required".into()));
        }
        let n = self.n_cases();
        if self.inbag.iter().any(|c| c.len() != n || c.iter().map(|&k| k as usize).sum::<usize>() != n) {
            return Err(Error::Model("in-bag counts must sum to the sample size".into()));
        }
        self.schema.validate()?;
        Ok(())
    }

    /// Dataset must carry the forest's variables with the same label sets.
    pub(crate) fn check_dataset(&self, dataset: &Dataset) -> Result<()> {
        let schema = dataset.schema()?;
        let same = schema.len() == self.schema.len()
            && schema
                .variables
                .iter()
                .zip(&self.schema.variables)
                .all(|(a, b)| a.name == b.name && a.labels == b.labels);
        if !same {
            return Err(invalid("dataset schema differs from the forest's"));
        }
        Ok(())
    }
}

/// Draw `n` cases with replacement; returns multiplicities.
pub fn bootstrap_counts<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<u32> {
    let mut counts = vec![0u32; n];
    for _ in 0..n {
        counts[rng.random_range(0..n)] += 1;
    }
    counts
}

/// Grow `B` trees, each on its own bootstrap sample. Tree `b` draws all of
/// its randomness from stream `b` of the master seed, so the result does not
/// depend on the number of worker threads.
pub fn fit(dataset: &Dataset, params: &ForestParams) -> Result<Forest> {
    if params.n_trees == 0 {
        return Err(invalid("a forest needs at least one tree"));
    }
    let data = TrainingData::new(dataset)?;
    let schema = dataset.schema()?;
    let tree_params = params.tree_params(schema.len());
    tree_params.validate()?;
    let events = dataset.n_events();
    if events == 0 || events < params.min_events {
        return Err(Error::InsufficientEvents {
            required: params.min_events.max(1),
            found: events,
        });
    }

    let grown: Vec<(Vec<u32>, SurvivalTree)> = (0..params.n_trees)
        .into_par_iter()
        .map(|b| grow_bootstrap_tree(&data, &tree_params, params.seed, b as u64))
        .collect::<Result<_>>()?;
    let (inbag, trees) = grown.into_iter().unzip();
    Ok(Forest {
        params: *params,
        schema,
        inbag,
        trees,
    })
}

fn grow_bootstrap_tree(
    data: &TrainingData<'_>,
    params: &TreeParams,
    seed: u64,
    index: u64,
) -> Result<(Vec<u32>, SurvivalTree)> {
    let mut rng = stream_rng(seed, index);
    let n = data.len();
    for _ in 0..MAX_BOOTSTRAP_RETRIES {
        let counts = bootstrap_counts(n, &mut rng);
        let events: usize = (0..n)
            .filter(|&i| data.events()[i])
            .map(|i| counts[i] as usize)
            .sum();
        if events >= params.min_events {
            let tree = grow_tree(data, &counts, params, &mut rng)?;
            return Ok((counts, tree));
        }
    }
    Err(Error::InsufficientEvents {
        required: params.min_events,
        found: 0,
    })
}

/// Ensemble survival and cumulative hazard at `x`: the tree curves averaged
/// exactly on the union of their jump times.
pub fn predict_ensemble(forest: &Forest, x: &[u32]) -> Result<(StepFunction, StepFunction)> {
    forest.schema.check_features(x)?;
    average_trees(forest, x, 0..forest.trees.len())
}

fn average_trees(
    forest: &Forest,
    x: &[u32],
    trees: impl Iterator<Item = usize>,
) -> Result<(StepFunction, StepFunction)> {
    let mut surv = Vec::new();
    let mut chf = Vec::new();
    for b in trees {
        let (s, h) = forest.trees[b].predict(x)?;
        surv.push(s);
        chf.push(h);
    }
    Ok((StepFunction::mean(&surv), StepFunction::mean(&chf)))
}

/// Out-of-bag ensemble curves for training case `case`, or `None` when the
/// case is in bag for every tree.
pub fn predict_oob(
    forest: &Forest,
    dataset: &Dataset,
    case: usize,
) -> Result<Option<(StepFunction, StepFunction)>> {
    forest.check_dataset(dataset)?;
    if case >= forest.n_cases() || dataset.len() != forest.n_cases() {
        return Err(invalid("case index outside the training sample"));
    }
    let oob = forest.oob_trees(case);
    if oob.is_empty() {
        return Ok(None);
    }
    let x = dataset.features(case)?;
    average_trees(forest, &x, oob.into_iter()).map(Some)
}

/// Harrell's concordance of `risk` with survival: over pairs with
/// `T_i < T_j` and `i` an event, count `risk_i > risk_j` as 1 and ties as 1/2.
pub fn harrell_concordance(times: &[f64], events: &[bool], risk: &[f64]) -> Result<f64> {
    if times.len() != events.len() || times.len() != risk.len() {
        return Err(invalid("times, statuses and scores differ in length"));
    }
    let mut permissible = 0.0;
    let mut concordant = 0.0;
    for i in 0..times.len() {
        if !events[i] {
            continue;
        }
        for j in 0..times.len() {
            if times[i] < times[j] {
                permissible += 1.0;
                if risk[i] > risk[j] {
                    concordant += 1.0;
                } else if risk[i] == risk[j] {
                    concordant += 0.5;
                }
            }
        }
    }
    if permissible == 0.0 {
        return Err(Error::NoComparablePairs);
    }
    Ok(concordant / permissible)
}

/// Precomputed out-of-bag routing and per-node mortality for a forest over
/// its training data. Mortality of a node is its cumulative hazard summed
/// over the distinct event times of the data.
pub(crate) struct OobContext<'a> {
    pub forest: &'a Forest,
    pub codes: Vec<&'a [u32]>,
    pub times: &'a [f64],
    pub events: &'a [bool],
    /// per tree, per node
    pub node_mortality: Vec<Vec<f64>>,
    /// per tree, per case: terminal node, or `u32::MAX` when in bag
    pub routes: Vec<Vec<u32>>,
}

pub(crate) const IN_BAG: u32 = u32::MAX;

impl<'a> OobContext<'a> {
    pub fn new(forest: &'a Forest, dataset: &'a Dataset) -> Result<Self> {
        forest.check_dataset(dataset)?;
        if dataset.len() != forest.n_cases() {
            return Err(invalid("dataset is not the forest's training sample"));
        }
        let codes = dataset.factor_codes()?;
        let mut grid: Vec<f64> = dataset
            .times()
            .iter()
            .zip(dataset.events())
            .filter(|(_, &e)| e)
            .map(|(&t, _)| t)
            .collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();

        let node_mortality = forest
            .trees
            .par_iter()
            .map(|tree| {
                tree.nodes()
                    .iter()
                    .enumerate()
                    .map(|(id, _)| tree.terminal(id).map_or(0.0, |t| summed_chf(t.chf(), &grid)))
                    .collect()
            })
            .collect();
        let routes = forest
            .trees
            .par_iter()
            .enumerate()
            .map(|(b, tree)| {
                (0..dataset.len())
                    .map(|i| {
                        if forest.is_oob(b, i) {
                            tree.route_case(&codes, i, |_| None) as u32
                        } else {
                            IN_BAG
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            forest,
            codes,
            times: dataset.times(),
            events: dataset.events(),
            node_mortality,
            routes,
        })
    }

    /// Mean per-tree mortality over the trees where `case` is out of bag.
    pub fn mortality(&self, case: usize, mut terminal: impl FnMut(usize) -> usize) -> Option<f64> {
        let mut sum = 0.0;
        let mut count = 0usize;
        for b in 0..self.routes.len() {
            if self.routes[b][case] == IN_BAG {
                continue;
            }
            sum += self.node_mortality[b][terminal(b)];
            count += 1;
        }
        (count > 0).then(|| sum / count as f64)
    }

    pub fn baseline_mortality(&self, case: usize) -> Option<f64> {
        self.mortality(case, |b| self.routes[b][case] as usize)
    }

    /// `1 - C` over the listed cases (repeats allowed) with known mortality.
    pub fn error_for(&self, cases: &[usize], mortality: &[Option<f64>]) -> Result<f64> {
        let mut t = Vec::with_capacity(cases.len());
        let mut e = Vec::with_capacity(cases.len());
        let mut m = Vec::with_capacity(cases.len());
        for (&i, mi) in cases.iter().zip(mortality) {
            if let Some(mi) = mi {
                t.push(self.times[i]);
                e.push(self.events[i]);
                m.push(*mi);
            }
        }
        Ok(1.0 - harrell_concordance(&t, &e, &m)?)
    }
}

fn summed_chf(chf: &StepFunction, grid: &[f64]) -> f64 {
    let (times, values) = (chf.times(), chf.values());
    let mut k = 0;
    let mut current = chf.initial_value();
    let mut total = 0.0;
    for &t in grid {
        while k < times.len() && times[k] <= t {
            current = values[k];
            k += 1;
        }
        total += current;
    }
    total
}

/// Out-of-bag prediction error: one minus Harrell's concordance between OOB
/// ensemble mortality and observed survival. Cases with no OOB tree are
/// skipped.
pub fn oob_error(forest: &Forest, dataset: &Dataset) -> Result<f64> {
    let ctx = OobContext::new(forest, dataset)?;
    let cases: Vec<usize> = (0..dataset.len()).collect();
    let mortality: Vec<Option<f64>> = cases.iter().map(|&i| ctx.baseline_mortality(i)).collect();
    ctx.error_for(&cases, &mortality)
}

/// OOB ensemble mortality per training case (`None` without OOB trees).
pub fn oob_mortality(forest: &Forest, dataset: &Dataset) -> Result<Vec<Option<f64>>> {
    let ctx = OobContext::new(forest, dataset)?;
    Ok((0..dataset.len()).map(|i| ctx.baseline_mortality(i)).collect())
}
