//! Synthetic survival truths with piecewise-constant hazards, exact error
//! measures against fitted curves, and the experiments built on them.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::{Exp1, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FactorSchema, FactorVariable, RawTable, SurvivalRecord};
use crate::error::{invalid, Result};
use crate::estimators::StepFunction;
use crate::factorsplit::ComplementaryPair;
use crate::forest::{fit, predict_ensemble, Forest, ForestParams};
use crate::rng::{derive_seed, stream_rng};
use crate::tree::{Node, SplitNode, SurvivalTree, TerminalNode};

/// A survival curve that can be evaluated, inverted and integrated exactly
/// against step functions.
pub trait SurvivalCurve {
    fn survival(&self, t: f64) -> f64;

    /// `S(t-)`; equal to `S(t)` for continuous curves.
    fn left_limit(&self, t: f64) -> f64 {
        self.survival(t)
    }

    /// Smallest `t >= 0` with `S(t) <= p`, or infinity when never reached.
    fn time_at(&self, p: f64) -> f64;

    /// Times where the curve changes form (jumps or hazard changes).
    fn breakpoints(&self) -> Vec<f64>;

    /// `∫_a^b (c - S(t))^2 dt`, for `[a, b)` free of breakpoints.
    fn squared_deviation(&self, c: f64, a: f64, b: f64) -> f64;
}

/// Hazard `rates[k]` on `[breaks[k-1], breaks[k])`, with `breaks[-1] = 0`;
/// the last rate continues forever.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseHazard {
    breaks: Vec<f64>,
    rates: Vec<f64>,
}

impl PiecewiseHazard {
    pub fn new(breaks: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if rates.len() != breaks.len() + 1 {
            return Err(invalid("need exactly one more rate than breakpoints"));
        }
        if breaks.first().is_some_and(|&b| !(b > 0.0)) || breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(invalid("hazard breakpoints must be positive and increasing"));
        }
        if breaks.iter().any(|b| !b.is_finite()) || rates.iter().any(|&r| !(r >= 0.0 && r.is_finite())) {
            return Err(invalid("hazard rates must be finite and non-negative"));
        }
        Ok(Self { breaks, rates })
    }

    pub fn constant(rate: f64) -> Result<Self> {
        Self::new(Vec::new(), vec![rate])
    }

    pub fn breaks(&self) -> &[f64] {
        &self.breaks
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    fn piece_start(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.breaks[k - 1]
        }
    }

    fn piece_of(&self, t: f64) -> usize {
        self.breaks.partition_point(|&b| b <= t)
    }

    /// `∫_0^t α(s) ds`.
    pub fn cumulative(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let k = self.piece_of(t);
        let mut h = 0.0;
        for j in 0..k {
            h += self.rates[j] * (self.breaks[j] - self.piece_start(j));
        }
        h + self.rates[k] * (t - self.piece_start(k))
    }

    /// Time at which the cumulative hazard first reaches `h`.
    pub fn inverse_cumulative(&self, h: f64) -> f64 {
        if h <= 0.0 {
            return 0.0;
        }
        let mut acc = 0.0;
        for k in 0..self.rates.len() {
            let start = self.piece_start(k);
            let width = self.breaks.get(k).map_or(f64::INFINITY, |&b| b - start);
            let gain = self.rates[k] * width;
            if acc + gain >= h {
                return start + (h - acc) / self.rates[k];
            }
            acc += gain;
        }
        f64::INFINITY
    }

    /// Cumulative hazard diverges only at infinity for finite rates.
    pub fn horizon(&self) -> f64 {
        f64::INFINITY
    }
}

impl SurvivalCurve for PiecewiseHazard {
    fn survival(&self, t: f64) -> f64 {
        (-self.cumulative(t)).exp()
    }

    fn time_at(&self, p: f64) -> f64 {
        if p >= 1.0 {
            0.0
        } else if p <= 0.0 {
            f64::INFINITY
        } else {
            self.inverse_cumulative(-p.ln())
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.breaks.clone()
    }

    fn squared_deviation(&self, c: f64, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        let r = self.rates[self.piece_of(a)];
        let s = self.survival(a);
        let w = b - a;
        // ∫ S = s (1 - e^{-rw}) / r,  ∫ S^2 = s^2 (1 - e^{-2rw}) / (2r)
        let (i1, i2) = if r == 0.0 {
            (s * w, s * s * w)
        } else {
            (
                s * -(-r * w).exp_m1() / r,
                s * s * -(-2.0 * r * w).exp_m1() / (2.0 * r),
            )
        };
        (c * c * w - 2.0 * c * i1 + i2).max(0.0)
    }
}

impl SurvivalCurve for StepFunction {
    fn survival(&self, t: f64) -> f64 {
        self.eval(t)
    }

    fn left_limit(&self, t: f64) -> f64 {
        StepFunction::left_limit(self, t)
    }

    fn time_at(&self, p: f64) -> f64 {
        if self.initial_value() <= p {
            return 0.0;
        }
        self.times()
            .iter()
            .zip(self.values())
            .find(|(_, &v)| v <= p)
            .map_or(f64::INFINITY, |(&t, _)| t)
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.times().to_vec()
    }

    fn squared_deviation(&self, c: f64, a: f64, b: f64) -> f64 {
        let d = c - self.eval(a);
        d * d * (b - a).max(0.0)
    }
}

/// `∫_0^s (step(t) - S(t))^2 dt`, integrated piece by piece in closed form.
pub fn integrated_squared_error(step: &StepFunction, curve: &impl SurvivalCurve, s_max: f64) -> f64 {
    let mut cuts: Vec<f64> = step
        .times()
        .iter()
        .copied()
        .chain(curve.breakpoints())
        .filter(|&t| t > 0.0 && t < s_max)
        .collect();
    cuts.push(0.0);
    cuts.push(s_max);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    cuts.windows(2)
        .map(|w| curve.squared_deviation(step.eval(w[0]), w[0], w[1]))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Censoring {
    None,
    Fixed { time: f64 },
    Exponential { rate: f64 },
    Uniform { low: f64, high: f64 },
}

impl Censoring {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Censoring::None => f64::INFINITY,
            Censoring::Fixed { time } => time,
            Censoring::Exponential { rate } => {
                let e: f64 = Exp1.sample(rng);
                e / rate
            }
            Censoring::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Censoring::None => true,
            Censoring::Fixed { time } => time >= 0.0 && time.is_finite(),
            Censoring::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            Censoring::Uniform { low, high } => low >= 0.0 && low <= high && high.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(invalid(format!("bad censoring distribution {self:?}")))
        }
    }
}

/// One point of the feature space with its probability and hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: Vec<u32>,
    pub probability: f64,
    pub hazard: PiecewiseHazard,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub schema: FactorSchema,
    pub atoms: Vec<Atom>,
    pub censoring: Censoring,
}

impl SyntheticTruth {
    pub fn new(schema: FactorSchema, atoms: Vec<Atom>, censoring: Censoring) -> Result<Self> {
        if atoms.is_empty() {
            return Err(invalid("feature space needs at least one atom"));
        }
        for a in &atoms {
            schema.check_features(&a.x)?;
            if !(a.probability > 0.0) {
                return Err(invalid("every atom needs positive probability"));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.probability).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("atom probabilities sum to {total}, not 1")));
        }
        for (i, a) in atoms.iter().enumerate() {
            if atoms[..i].iter().any(|b| b.x == a.x) {
                return Err(invalid("atoms must be distinct feature vectors"));
            }
        }
        censoring.validate()?;
        Ok(Self {
            schema,
            atoms,
            censoring,
        })
    }

    /// Earliest divergence time of the atoms' cumulative hazards.
    pub fn horizon(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.hazard.horizon())
            .fold(f64::INFINITY, f64::min)
    }

    /// `μ`-weighted true survival.
    pub fn marginal_survival(&self, t: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.probability * a.hazard.survival(t))
            .sum()
    }

    /// Three binary variables, all eight combinations, unequal
    /// probabilities and hazards that change at `t = 1`; exponential
    /// censoring.
    pub fn eight_atoms() -> Self {
        let binary = |name: &str| FactorVariable::new(name, vec!["0".into(), "1".into()]);
        let schema = FactorSchema::new(vec![binary("x1"), binary("x2"), binary("x3")])
            .expect("fixed schema is valid");
        let atoms = (0..8u32)
            .map(|k| {
                let x = vec![k & 1, (k >> 1) & 1, (k >> 2) & 1];
                let base = 0.3 + 0.6 * x[0] as f64 + 0.3 * x[1] as f64 + 0.15 * x[2] as f64;
                Atom {
                    x,
                    probability: f64::from(k + 1) / 36.0,
                    hazard: PiecewiseHazard::new(vec![1.0], vec![base, 1.5 * base])
                        .expect("fixed hazard is valid"),
                }
            })
            .collect();
        Self::new(schema, atoms, Censoring::Exponential { rate: 0.2 }).expect("fixed truth is valid")
    }
}

/// Draw `n` records: `X ~ μ`, `T0` by inverting the atom's cumulative
/// hazard at a unit exponential, `C` independently; emit `(min(T0, C), T0 <= C, X)`.
pub fn generate<R: Rng + ?Sized>(truth: &SyntheticTruth, n: usize, rng: &mut R) -> Result<Dataset> {
    if n == 0 {
        return Err(invalid("sample size must be positive"));
    }
    let pick = WeightedIndex::new(truth.atoms.iter().map(|a| a.probability))
        .map_err(|e| invalid(format!("atom probabilities: {e}")))?;
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let atom = &truth.atoms[pick.sample(rng)];
        let e: f64 = Exp1.sample(rng);
        let t0 = atom.hazard.inverse_cumulative(e);
        let c = truth.censoring.draw(rng);
        let time = t0.min(c);
        if !time.is_finite() {
            return Err(invalid("event never occurs and nothing censors it"));
        }
        records.push(SurvivalRecord {
            time,
            event: t0 <= c,
            features: atom.x.clone(),
        });
    }
    Dataset::from_records(&truth.schema, &records)
}

/// `sup_{0 <= s <= t_max} |Σ μ(x) Ŝ(s|x) - Σ μ(x) S(s|x)|`, one prediction
/// per atom in order.
///
/// Between consecutive jumps of the predictions the mixture is constant
/// while the truth is continuous and non-increasing, so the supremum is
/// attained at a jump (value or left limit) or an end point. The grid
/// points are evaluated as well and can only confirm that maximum.
pub fn sup_error<C: SurvivalCurve>(
    predictions: &[C],
    truth: &SyntheticTruth,
    t_max: f64,
    grid: usize,
) -> Result<f64> {
    if !(t_max >= 0.0) || t_max >= truth.horizon() {
        return Err(invalid(format!("t_max {t_max} must lie in [0, horizon)")));
    }
    if predictions.len() != truth.atoms.len() {
        return Err(invalid("need exactly one prediction per atom"));
    }
    let mut points: Vec<f64> = (0..=grid.max(1))
        .map(|k| t_max * k as f64 / grid.max(1) as f64)
        .collect();
    for p in predictions {
        points.extend(p.breakpoints().into_iter().filter(|&t| t > 0.0 && t <= t_max));
    }
    points.sort_by(f64::total_cmp);
    points.dedup();

    let mut worst = 0.0f64;
    for &t in &points {
        let mut model = 0.0;
        let mut model_left = 0.0;
        let mut exact = 0.0;
        for (atom, p) in truth.atoms.iter().zip(predictions) {
            model += atom.probability * p.survival(t);
            model_left += atom.probability * p.left_limit(t);
            exact += atom.probability * atom.hazard.survival(t);
        }
        worst = worst.max((model - exact).abs());
        if t > 0.0 {
            worst = worst.max((model_left - exact).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceConfig {
    /// Settings for the single-tree fit; `n_trees` is ignored.
    pub tree: ForestParams,
    /// Settings for the forest fit.
    pub forest: ForestParams,
    pub t_max: f64,
    pub grid: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        let base = ForestParams {
            n_trees: 100,
            mtry: None,
            nsplit: 0,
            min_events: 3,
            seed: 0,
        };
        Self {
            tree: ForestParams { n_trees: 1, ..base },
            forest: base,
            t_max: 2.0,
            grid: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub n: usize,
    pub seed: u64,
    pub tree_error: f64,
    pub forest_error: f64,
    /// The single tree gives every atom its own terminal node.
    pub tree_isolates: bool,
    /// Fraction of forest trees giving every atom its own terminal node.
    pub forest_isolation: f64,
}

/// For every `(n, seed)`: generate a sample, fit one bootstrapped tree and
/// a forest, and measure both against the truth.
pub fn convergence_experiment(
    truth: &SyntheticTruth,
    n_grid: &[usize],
    config: &ConvergenceConfig,
    seeds: &[u64],
) -> Result<Vec<ConvergenceRow>> {
    if n_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid("sample sizes must be increasing"));
    }
    let cells: Vec<(usize, u64)> = n_grid
        .iter()
        .flat_map(|&n| seeds.iter().map(move |&s| (n, s)))
        .collect();
    cells
        .par_iter()
        .map(|&(n, seed)| convergence_cell(truth, n, seed, config))
        .collect()
}

fn convergence_cell(truth: &SyntheticTruth, n: usize, seed: u64, config: &ConvergenceConfig) -> Result<ConvergenceRow> {
    let cell_seed = derive_seed(seed, n as u64);
    let data = generate(truth, n, &mut stream_rng(cell_seed, 0))?;
    let tree = fit(
        &data,
        &ForestParams {
            n_trees: 1,
            seed: derive_seed(cell_seed, 1),
            ..config.tree
        },
    )?;
    let forest = fit(
        &data,
        &ForestParams {
            seed: derive_seed(cell_seed, 2),
            ..config.forest
        },
    )?;
    let tree_error = sup_error(&atom_predictions(&tree, truth)?, truth, config.t_max, config.grid)?;
    let forest_error = sup_error(&atom_predictions(&forest, truth)?, truth, config.t_max, config.grid)?;
    let isolated = |t: &SurvivalTree| -> Result<bool> {
        let mut leaves = truth
            .atoms
            .iter()
            .map(|a| t.terminal_index(&a.x))
            .collect::<Result<Vec<_>>>()?;
        leaves.sort_unstable();
        leaves.dedup();
        Ok(leaves.len() == truth.atoms.len())
    };
    let tree_isolates = isolated(&tree.trees()[0])?;
    let mut isolating = 0usize;
    for t in forest.trees() {
        isolating += usize::from(isolated(t)?);
    }
    Ok(ConvergenceRow {
        n,
        seed,
        tree_error,
        forest_error,
        tree_isolates,
        forest_isolation: isolating as f64 / forest.trees().len() as f64,
    })
}

/// Ensemble survival at every atom of the truth.
pub fn atom_predictions(forest: &Forest, truth: &SyntheticTruth) -> Result<Vec<StepFunction>> {
    truth
        .atoms
        .iter()
        .map(|a| predict_ensemble(forest, &a.x).map(|(s, _)| s))
        .collect()
}

/// Median of a non-empty slice (mean of the middle pair for even length).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Trees with weights; the ensemble survival is `Σ w_b S_b(t|x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedEnsemble {
    pub weights: Vec<f64>,
    pub trees: Vec<SurvivalTree>,
}

impl WeightedEnsemble {
    pub fn survival(&self, x: &[u32]) -> Result<StepFunction> {
        let mut parts = Vec::with_capacity(self.trees.len());
        for (w, t) in self.weights.iter().zip(&self.trees) {
            parts.push((*w, t.predict(x)?.0));
        }
        Ok(StepFunction::weighted_sum(&parts))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StaircaseApproximation {
    pub ensemble: WeightedEnsemble,
    /// Number of staircase steps; the ensemble also holds one floor tree
    /// when `S(s_max) > 0`.
    pub steps: usize,
    /// `∫_0^{s_max} (S_e(t|x) - S(t|x))^2 dt`.
    pub error: f64,
    /// `(steps, error)` for every step count tried.
    pub history: Vec<(usize, f64)>,
}

const MAX_STAIRCASE_STEPS: usize = 1 << 16;

/// Approximate `S(·|x)` on `[0, s_max]` by a weighted ensemble of trees
/// with `d + 1` terminal nodes each.
///
/// Tree `b` isolates `x` through one split per variable; `x`'s leaf holds a
/// single event at `T_b` and every other leaf a single event at time 0.
/// Step `b` of `B` sits where `S` crosses `1 - (b - 1/2)/B (1 - S(s_max))`
/// and weighs `(1 - S(s_max))/B`; a floor tree with its event beyond
/// `s_max` carries the remaining mass `S(s_max)`. `B` doubles from 1 until
/// the exactly integrated squared error is at most `eps`.
pub fn staircase_approximation(
    schema: &FactorSchema,
    x: &[u32],
    curve: &impl SurvivalCurve,
    s_max: f64,
    eps: f64,
) -> Result<StaircaseApproximation> {
    if !(eps > 0.0) {
        return Err(invalid("target error must be positive"));
    }
    if !(s_max > 0.0 && s_max.is_finite()) {
        return Err(invalid("s_max must be positive and finite"));
    }
    let mut history = Vec::new();
    let mut steps = 1;
    loop {
        let (ensemble, error) = staircase_with_steps(schema, x, curve, s_max, steps)?;
        history.push((steps, error));
        if error <= eps {
            return Ok(StaircaseApproximation {
                ensemble,
                steps,
                error,
                history,
            });
        }
        if steps >= MAX_STAIRCASE_STEPS {
            return Err(invalid(format!(
                "error {error} still above {eps} with {steps} steps"
            )));
        }
        steps *= 2;
    }
}

/// The staircase ensemble with a given number of steps and its exactly
/// integrated squared error on `[0, s_max]`.
pub fn staircase_with_steps(
    schema: &FactorSchema,
    x: &[u32],
    curve: &impl SurvivalCurve,
    s_max: f64,
    steps: usize,
) -> Result<(WeightedEnsemble, f64)> {
    if steps == 0 {
        return Err(invalid("need at least one step"));
    }
    schema.check_features(x)?;
    if schema.variables.iter().any(|v| v.label_count() < 2) {
        return Err(invalid("every variable needs two labels to isolate x"));
    }
    let floor = curve.survival(s_max);
    let mut weights = Vec::with_capacity(steps + 1);
    let mut trees = Vec::with_capacity(steps + 1);
    for b in 1..=steps {
        let level = 1.0 - (b as f64 - 0.5) / steps as f64 * (1.0 - floor);
        trees.push(isolating_tree(schema, x, curve.time_at(level))?);
        weights.push((1.0 - floor) / steps as f64);
    }
    if floor > 0.0 {
        trees.push(isolating_tree(schema, x, 2.0 * s_max + 1.0)?);
        weights.push(floor);
    }
    let ensemble = WeightedEnsemble { weights, trees };
    let error = integrated_squared_error(&ensemble.survival(x)?, curve, s_max);
    Ok((ensemble, error))
}

/// Staircase approximation of an atom of a synthetic truth.
pub fn truth_staircase(
    truth: &SyntheticTruth,
    atom: usize,
    s_max: f64,
    eps: f64,
) -> Result<StaircaseApproximation> {
    let a = truth
        .atoms
        .get(atom)
        .ok_or_else(|| invalid(format!("no atom {atom}")))?;
    if s_max >= truth.horizon() {
        return Err(invalid("s_max must lie below the horizon"));
    }
    staircase_approximation(&truth.schema, &a.x, &a.hazard, s_max, eps)
}

/// Tree splitting once on each variable so that `x` ends alone; `x`'s leaf
/// has one event at `event_time`, the others one event at time 0.
fn isolating_tree(schema: &FactorSchema, x: &[u32], event_time: f64) -> Result<SurvivalTree> {
    if !event_time.is_finite() {
        return Err(invalid("survival curve never reaches the requested level"));
    }
    let times = [event_time, 0.0];
    let events = [true, true];
    let weights = [1, 1];
    let mut nodes = Vec::new();
    push_isolating(schema, x, 0, &times, &events, &weights, &mut nodes)?;
    SurvivalTree::from_nodes(nodes)
}

fn push_isolating(
    schema: &FactorSchema,
    x: &[u32],
    variable: usize,
    times: &[f64],
    events: &[bool],
    weights: &[u32],
    nodes: &mut Vec<Node>,
) -> Result<()> {
    if variable == schema.len() {
        nodes.push(Node::Terminal(TerminalNode::from_cases(times, events, weights, &[0])));
        return Ok(());
    }
    let pair = ComplementaryPair::from_left_labels(
        schema.variables[variable].label_count(),
        &[x[variable] as usize],
    )?;
    let x_left = pair.is_left(x[variable] as usize);
    let id = nodes.len();
    // placeholder children, patched once both subtrees are laid out
    nodes.push(Node::Split(SplitNode {
        variable,
        pair,
        left: 0,
        right: 0,
    }));
    let lay = |isolating: bool, nodes: &mut Vec<Node>| -> Result<usize> {
        let start = nodes.len();
        if isolating {
            push_isolating(schema, x, variable + 1, times, events, weights, nodes)?;
        } else {
            nodes.push(Node::Terminal(TerminalNode::from_cases(times, events, weights, &[1])));
        }
        Ok(start)
    };
    let left = lay(x_left, nodes)?;
    let right = lay(!x_left, nodes)?;
    if let Node::Split(s) = &mut nodes[id] {
        s.left = left;
        s.right = right;
    }
    Ok(())
}

/// A 312-case stand-in for the Mayo Clinic PBC data: the same 17
/// covariates (7 discrete, 10 continuous) with plausible marginals and
/// risk driven mostly by bilirubin, albumin, age, edema and stage.
/// Times are in days; `status` is 1 for death.
pub fn pbc_like<R: Rng + ?Sized>(n: usize, rng: &mut R) -> RawTable {
    let header = [
        "time", "status", "trt", "age", "sex", "ascites", "hepato", "spiders", "edema", "bili", "chol",
        "albumin", "copper", "alk", "ast", "trig", "platelet", "protime", "stage",
    ];
    let normal = |rng: &mut R, mean: f64, sd: f64| -> f64 {
        Normal::new(mean, sd).expect("positive sd").sample(rng)
    };
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let trt = 1 + u32::from(rng.random_bool(0.5));
        let age = normal(rng, 50.0, 10.0).clamp(26.0, 79.0);
        let sex = if rng.random_bool(0.88) { "f" } else { "m" };
        let ascites = u32::from(rng.random_bool(0.08));
        let hepato = u32::from(rng.random_bool(0.5));
        let spiders = u32::from(rng.random_bool(0.3));
        let u: f64 = rng.random();
        let edema = if u < 0.85 {
            0.0
        } else if u < 0.94 {
            0.5
        } else {
            1.0
        };
        let bili = normal(rng, 0.4, 1.0).exp().clamp(0.3, 28.0);
        let chol = normal(rng, 5.8, 0.4).exp();
        let albumin = normal(rng, 3.5, 0.42).clamp(1.9, 4.7);
        let copper = normal(rng, 4.3, 0.8).exp();
        let alk = normal(rng, 7.3, 0.7).exp();
        let ast = normal(rng, 4.7, 0.4).exp();
        let trig = normal(rng, 4.7, 0.4).exp();
        let platelet = normal(rng, 260.0, 95.0).max(60.0);
        let protime = normal(rng, 10.7, 1.0).clamp(9.0, 18.0);
        let s: f64 = rng.random();
        let stage = if s < 0.05 {
            1
        } else if s < 0.25 {
            2
        } else if s < 0.62 {
            3
        } else {
            4
        };

        let risk = 1.1 * bili.ln() - 2.2 * (albumin - 3.5) + 0.035 * (age - 50.0)
            + 0.8 * edema
            + 0.3 * (f64::from(stage) - 3.0)
            + 0.25 * (protime - 10.7)
            + 0.2 * (copper / 70.0).ln();
        let e: f64 = Exp1.sample(rng);
        let years = e / (0.07 * risk.exp());
        let censor = 1.0 + 11.0 * rng.random::<f64>();
        let (time, status) = if years <= censor { (years, 1) } else { (censor, 0) };

        rows.push(vec![
            format!("{}", (time * 365.25).round().max(1.0)),
            status.to_string(),
            trt.to_string(),
            format!("{age:.2}"),
            sex.to_string(),
            ascites.to_string(),
            hepato.to_string(),
            spiders.to_string(),
            format!("{edema}"),
            format!("{bili:.1}"),
            format!("{chol:.0}"),
            format!("{albumin:.2}"),
            format!("{copper:.0}"),
            format!("{alk:.1}"),
            format!("{ast:.2}"),
            format!("{trig:.0}"),
            format!("{platelet:.0}"),
            format!("{protime:.1}"),
            stage.to_string(),
        ]);
    }
    RawTable {
        header: header.iter().map(|h| h.to_string()).collect(),
        rows,
    }
}

/// Covariates of [`pbc_like`] that carry continuous values.
pub const PBC_CONTINUOUS: [&str; 10] = [
    "age", "bili", "chol", "albumin", "copper", "alk", "ast", "trig", "platelet", "protime",
];
