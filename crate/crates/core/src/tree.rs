//! Growing a single survival tree on a (bootstrap) sample, and routing
//! feature vectors to its terminal nodes.

use std::collections::HashSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{invalid, Error, Result};
use crate::estimators::{
    build_weighted_risk_table, kaplan_meier, logrank_from_buckets, nelson_aalen, RiskTable,
    StepFunction,
};
use crate::factorsplit::{
    pair_count_saturating, sample_pair, ComplementaryPair, Daughter, MAX_ENUMERABLE_LABELS,
};

/// Splits whose log-rank values agree to this relative precision are ties.
const TIE_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    /// Candidate variables drawn per node.
    pub mtry: usize,
    /// Random complementary pairs tried per candidate variable; 0 means
    /// enumerate every pair (factors with at most 32 labels).
    pub nsplit: usize,
    /// Minimum number of events in every terminal node (`d0`).
    pub min_events: usize,
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.mtry == 0 {
            return Err(invalid("mtry must be >= 1"));
        }
        if self.min_events == 0 {
            return Err(invalid("minimum terminal-node events must be >= 1"));
        }
        Ok(())
    }
}

/// Column-major view of a factor dataset used for growing and routing.
#[derive(Debug, Clone)]
pub struct TrainingData<'a> {
    times: &'a [f64],
    events: &'a [bool],
    codes: Vec<&'a [u32]>,
    label_counts: Vec<usize>,
}

impl<'a> TrainingData<'a> {
    pub fn new(dataset: &'a Dataset) -> Result<Self> {
        Ok(Self {
            times: dataset.times(),
            events: dataset.events(),
            codes: dataset.factor_codes()?,
            label_counts: dataset.schema()?.label_counts(),
        })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_variables(&self) -> usize {
        self.codes.len()
    }

    pub fn times(&self) -> &'a [f64] {
        self.times
    }

    pub fn events(&self) -> &'a [bool] {
        self.events
    }

    pub fn codes(&self) -> &[&'a [u32]] {
        &self.codes
    }

    pub fn label_counts(&self) -> &[usize] {
        &self.label_counts
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitNode {
    pub variable: usize,
    pub pair: ComplementaryPair,
    pub left: usize,
    pub right: usize,
}

/// Leaf with its risk table, Kaplan-Meier and Nelson-Aalen estimators and
/// the distinct ids of the growing-sample cases it holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTerminal", into = "RawTerminal")]
pub struct TerminalNode {
    risk: RiskTable,
    survival: StepFunction,
    chf: StepFunction,
    cases: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct RawTerminal {
    risk: RiskTable,
    cases: Vec<u32>,
}

impl TryFrom<RawTerminal> for TerminalNode {
    type Error = Error;

    fn try_from(raw: RawTerminal) -> Result<Self> {
        raw.risk.validate()?;
        Ok(TerminalNode::from_risk(raw.risk, raw.cases))
    }
}

impl From<TerminalNode> for RawTerminal {
    fn from(t: TerminalNode) -> Self {
        RawTerminal {
            risk: t.risk,
            cases: t.cases,
        }
    }
}

impl TerminalNode {
    fn from_risk(risk: RiskTable, cases: Vec<u32>) -> Self {
        Self {
            survival: kaplan_meier(&risk),
            chf: nelson_aalen(&risk),
            risk,
            cases,
        }
    }

    /// Leaf built from the given cases of `times`/`events` with multiplicities.
    pub fn from_cases(times: &[f64], events: &[bool], weights: &[u32], cases: &[u32]) -> Self {
        let t: Vec<f64> = cases.iter().map(|&i| times[i as usize]).collect();
        let e: Vec<bool> = cases.iter().map(|&i| events[i as usize]).collect();
        let w: Vec<u32> = cases.iter().map(|&i| weights[i as usize]).collect();
        let mut ids = cases.to_vec();
        ids.sort_unstable();
        Self::from_risk(build_weighted_risk_table(&t, &e, &w), ids)
    }

    pub fn risk(&self) -> &RiskTable {
        &self.risk
    }

    pub fn survival(&self) -> &StepFunction {
        &self.survival
    }

    pub fn chf(&self) -> &StepFunction {
        &self.chf
    }

    pub fn cases(&self) -> &[u32] {
        &self.cases
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Split(SplitNode),
    Terminal(TerminalNode),
}

/// Binary survival tree stored as a preorder node array (left subtree first).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawTree", into = "RawTree")]
pub struct SurvivalTree {
    nodes: Vec<Node>,
}

#[derive(Serialize, Deserialize)]
struct RawTree {
    nodes: Vec<Node>,
}

impl TryFrom<RawTree> for SurvivalTree {
    type Error = Error;

    fn try_from(raw: RawTree) -> Result<Self> {
        SurvivalTree::from_nodes(raw.nodes)
    }
}

impl From<SurvivalTree> for RawTree {
    fn from(t: SurvivalTree) -> Self {
        RawTree { nodes: t.nodes }
    }
}

impl SurvivalTree {
    /// Wrap a preorder node array, checking that it forms a tree.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Model("tree has no nodes".into()));
        }
        // a preorder walk must visit 0, 1, 2, ... in order
        let mut stack = vec![0usize];
        let mut next = 0usize;
        while let Some(id) = stack.pop() {
            if id != next || id >= nodes.len() {
                return Err(Error::Model(format!("node {id} is not in preorder")));
            }
            next += 1;
            if let Node::Split(s) = &nodes[id] {
                stack.push(s.right);
                stack.push(s.left);
            }
        }
        if next != nodes.len() {
            return Err(Error::Model("tree has unreachable nodes".into()));
        }
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn terminal(&self, id: usize) -> Option<&TerminalNode> {
        match self.nodes.get(id) {
            Some(Node::Terminal(t)) => Some(t),
            _ => None,
        }
    }

    pub fn terminals(&self) -> impl Iterator<Item = (usize, &TerminalNode)> {
        self.nodes.iter().enumerate().filter_map(|(i, n)| match n {
            Node::Terminal(t) => Some((i, t)),
            Node::Split(_) => None,
        })
    }

    pub fn n_terminals(&self) -> usize {
        self.terminals().count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match &nodes[id] {
                Node::Terminal(_) => 0,
                Node::Split(s) => 1 + walk(nodes, s.left).max(walk(nodes, s.right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn uses_variable(&self, variable: usize) -> bool {
        self.nodes
            .iter()
            .any(|n| matches!(n, Node::Split(s) if s.variable == variable))
    }

    /// Terminal node reached by `x`.
    pub fn terminal_index(&self, x: &[u32]) -> Result<usize> {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Terminal(_) => return Ok(id),
                Node::Split(s) => {
                    let label = *x.get(s.variable).ok_or_else(|| {
                        invalid(format!("feature vector lacks variable {}", s.variable))
                    })?;
                    id = match s.pair.assign_daughter(label as usize)? {
                        Daughter::Left => s.left,
                        Daughter::Right => s.right,
                    };
                }
            }
        }
    }

    /// Route case `case` of column-major `codes`. `override_split` may force
    /// a daughter at splits on a given variable (used for importance).
    pub(crate) fn route_case(
        &self,
        codes: &[&[u32]],
        case: usize,
        mut override_split: impl FnMut(usize) -> Option<Daughter>,
    ) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id] {
                Node::Terminal(_) => return id,
                Node::Split(s) => {
                    let side = override_split(s.variable).unwrap_or_else(|| {
                        if s.pair.is_left(codes[s.variable][case] as usize) {
                            Daughter::Left
                        } else {
                            Daughter::Right
                        }
                    });
                    id = match side {
                        Daughter::Left => s.left,
                        Daughter::Right => s.right,
                    };
                }
            }
        }
    }

    /// Kaplan-Meier and Nelson-Aalen estimators of the node reached by `x`.
    pub fn predict(&self, x: &[u32]) -> Result<(&StepFunction, &StepFunction)> {
        let t = self
            .terminal(self.terminal_index(x)?)
            .expect("routing ends at a terminal node");
        Ok((&t.survival, &t.chf))
    }
}

/// Owned-curve form of [`SurvivalTree::predict`].
pub fn predict_tree(tree: &SurvivalTree, x: &[u32]) -> Result<(StepFunction, StepFunction)> {
    tree.predict(x).map(|(s, h)| (s.clone(), h.clone()))
}

/// Grow a tree on the sample where case `i` appears `weights[i]` times.
pub fn grow_tree<R: Rng + ?Sized>(
    data: &TrainingData<'_>,
    weights: &[u32],
    params: &TreeParams,
    rng: &mut R,
) -> Result<SurvivalTree> {
    params.validate()?;
    if weights.len() != data.len() {
        return Err(invalid("one multiplicity per case is required"));
    }
    let events: u64 = (0..data.len())
        .filter(|&i| data.events[i])
        .map(|i| weights[i] as u64)
        .sum();
    if events < params.min_events as u64 {
        return Err(Error::InsufficientEvents {
            required: params.min_events,
            found: events as usize,
        });
    }
    let mut root: Vec<u32> = (0..data.len() as u32).filter(|&i| weights[i as usize] > 0).collect();
    root.sort_by(|&a, &b| data.times[a as usize].total_cmp(&data.times[b as usize]));

    let max_labels = data.label_counts.iter().copied().max().unwrap_or(0);
    let mut grower = Grower {
        data,
        weights,
        params,
        rng,
        scratch: Scratch {
            present: vec![false; max_labels],
            local: vec![u32::MAX; max_labels],
            ..Scratch::default()
        },
    };

    let mut nodes: Vec<Node> = Vec::new();
    // (cases, parent split id, side)
    let mut stack: Vec<(Vec<u32>, Option<(usize, Daughter)>)> = vec![(root, None)];
    while let Some((cases, parent)) = stack.pop() {
        let id = nodes.len();
        if let Some((p, side)) = parent {
            if let Node::Split(s) = &mut nodes[p] {
                match side {
                    Daughter::Left => s.left = id,
                    Daughter::Right => s.right = id,
                }
            }
        }
        match grower.best_split(&cases) {
            Some((variable, pair)) => {
                let codes = data.codes[variable];
                let (left, right): (Vec<u32>, Vec<u32>) = cases
                    .iter()
                    .partition(|&&i| pair.is_left(codes[i as usize] as usize));
                nodes.push(Node::Split(SplitNode {
                    variable,
                    pair,
                    left: usize::MAX,
                    right: usize::MAX,
                }));
                stack.push((right, Some((id, Daughter::Right))));
                stack.push((left, Some((id, Daughter::Left))));
            }
            None => nodes.push(Node::Terminal(TerminalNode::from_cases(
                data.times,
                data.events,
                weights,
                &cases,
            ))),
        }
    }
    Ok(SurvivalTree { nodes })
}

#[derive(Default)]
struct Scratch {
    event_times: Vec<f64>,
    bucket: Vec<i32>,
    d_total: Vec<f64>,
    c_total: Vec<f64>,
    d_left: Vec<f64>,
    c_left: Vec<f64>,
    /// per present label, per bucket
    d_label: Vec<f64>,
    c_label: Vec<f64>,
    events_label: Vec<f64>,
    present: Vec<bool>,
    local: Vec<u32>,
    present_labels: Vec<u32>,
}

enum Candidate {
    /// Node-level partition over the present labels (bit j = j-th present
    /// label goes left); absent labels are routed when materialized.
    Local { mask: u32, labels: Vec<u32> },
    Pair(ComplementaryPair),
}

struct Best {
    stat: f64,
    variable: usize,
    candidate: Candidate,
    ties: u32,
}

struct Grower<'a, 'd, R: ?Sized> {
    data: &'a TrainingData<'d>,
    weights: &'a [u32],
    params: &'a TreeParams,
    rng: &'a mut R,
    scratch: Scratch,
}

impl<R: Rng + ?Sized> Grower<'_, '_, R> {
    fn best_split(&mut self, cases: &[u32]) -> Option<(usize, ComplementaryPair)> {
        let node_events = self.prepare_buckets(cases);
        let d0 = self.params.min_events as f64;
        if node_events < 2.0 * d0 {
            return None;
        }

        // uniform draw without replacement among non-degenerate variables
        let n_vars = self.data.n_variables();
        let mut order: Vec<usize> = (0..n_vars).collect();
        let mut best: Option<Best> = None;
        let mut taken = 0;
        for i in 0..n_vars {
            if taken == self.params.mtry {
                break;
            }
            let j = self.rng.random_range(i..n_vars);
            order.swap(i, j);
            let v = order[i];
            if self.collect_present(v, cases) < 2 {
                continue;
            }
            taken += 1;
            self.evaluate_variable(v, cases, node_events, &mut best);
        }

        let best = best?;
        let pair = match best.candidate {
            Candidate::Pair(p) => p,
            Candidate::Local { mask, labels } => {
                let l = self.data.label_counts[best.variable];
                let mut left: Vec<usize> = labels
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| mask >> j & 1 == 1)
                    .map(|(_, &lab)| lab as usize)
                    .collect();
                // labels absent from the node go to a fair-coin side
                for lab in 0..l {
                    if !labels.contains(&(lab as u32)) && self.rng.random_bool(0.5) {
                        left.push(lab);
                    }
                }
                ComplementaryPair::from_left_labels(l, &left)
                    .expect("node partition leaves both sides non-empty")
            }
        };
        Some((best.variable, pair))
    }

    /// Bucket the node's cases by event time; returns the node's event count.
    fn prepare_buckets(&mut self, cases: &[u32]) -> f64 {
        let s = &mut self.scratch;
        let (times, events) = (self.data.times, self.data.events);
        s.event_times.clear();
        for &i in cases {
            let i = i as usize;
            if events[i] && s.event_times.last() != Some(&times[i]) {
                s.event_times.push(times[i]);
            }
        }
        let m = s.event_times.len();
        s.d_total.clear();
        s.d_total.resize(m, 0.0);
        s.c_total.clear();
        s.c_total.resize(m, 0.0);
        s.bucket.clear();
        let mut k: i32 = -1;
        let mut total_events = 0.0;
        for &i in cases {
            let i = i as usize;
            while ((k + 1) as usize) < m && s.event_times[(k + 1) as usize] <= times[i] {
                k += 1;
            }
            s.bucket.push(k);
            if k >= 0 {
                let w = self.weights[i] as f64;
                s.c_total[k as usize] += w;
                if events[i] {
                    s.d_total[k as usize] += w;
                    total_events += w;
                }
            }
        }
        total_events
    }

    /// Record the labels of `variable` present in the node (sorted) and
    /// return how many there are.
    fn collect_present(&mut self, variable: usize, cases: &[u32]) -> usize {
        let s = &mut self.scratch;
        let codes = self.data.codes[variable];
        s.present_labels.clear();
        for &i in cases {
            let c = codes[i as usize];
            if !s.present[c as usize] {
                s.present[c as usize] = true;
                s.present_labels.push(c);
            }
        }
        for &c in &s.present_labels {
            s.present[c as usize] = false;
        }
        s.present_labels.sort_unstable();
        s.present_labels.len()
    }

    fn node_size(&self, cases: &[u32]) -> u64 {
        cases.iter().map(|&i| self.weights[i as usize] as u64).sum()
    }

    fn evaluate_variable(
        &mut self,
        variable: usize,
        cases: &[u32],
        node_events: f64,
        best: &mut Option<Best>,
    ) {
        let l = self.data.label_counts[variable];
        let total_pairs = pair_count_saturating(l);
        let nsplit = self.params.nsplit as u64;
        let enumerable = l <= MAX_ENUMERABLE_LABELS;
        if enumerable && (nsplit == 0 || nsplit >= total_pairs) {
            self.enumerate_variable(variable, cases, node_events, best);
        } else {
            let size = self.node_size(cases);
            let wanted = if nsplit == 0 { size } else { nsplit.min(size) };
            self.sample_variable(variable, cases, node_events, wanted.min(total_pairs), best);
        }
    }

    /// Every node-level partition of the present labels, visited in Gray
    /// code order so each step moves one label's counts across.
    fn enumerate_variable(
        &mut self,
        variable: usize,
        cases: &[u32],
        node_events: f64,
        best: &mut Option<Best>,
    ) {
        let codes = self.data.codes[variable];
        let d0 = self.params.min_events as f64;
        let s = &mut self.scratch;
        let k_labels = s.present_labels.len();
        let m = s.event_times.len();
        for (j, &lab) in s.present_labels.iter().enumerate() {
            s.local[lab as usize] = j as u32;
        }
        s.d_label.clear();
        s.d_label.resize(k_labels * m, 0.0);
        s.c_label.clear();
        s.c_label.resize(k_labels * m, 0.0);
        s.events_label.clear();
        s.events_label.resize(k_labels, 0.0);
        for (pos, &i) in cases.iter().enumerate() {
            let k = s.bucket[pos];
            if k < 0 {
                continue;
            }
            let i = i as usize;
            let j = s.local[codes[i] as usize] as usize;
            let w = self.weights[i] as f64;
            s.c_label[j * m + k as usize] += w;
            if self.data.events[i] {
                s.d_label[j * m + k as usize] += w;
                s.events_label[j] += w;
            }
        }
        for &lab in &s.present_labels {
            s.local[lab as usize] = u32::MAX;
        }

        s.d_left.clear();
        s.d_left.resize(m, 0.0);
        s.c_left.clear();
        s.c_left.resize(m, 0.0);
        let mut left_events = 0.0;
        let n_masks: u64 = 1 << (k_labels - 1);
        for step in 1..n_masks {
            let gray = step ^ (step >> 1);
            let bit = step.trailing_zeros() as usize;
            let j = bit + 1; // local label 0 stays right
            let sign = if gray >> bit & 1 == 1 { 1.0 } else { -1.0 };
            let row = j * m..(j + 1) * m;
            for (a, b) in s.d_left.iter_mut().zip(&s.d_label[row.clone()]) {
                *a += sign * b;
            }
            for (a, b) in s.c_left.iter_mut().zip(&s.c_label[row]) {
                *a += sign * b;
            }
            left_events += sign * s.events_label[j];
            if left_events < d0 || node_events - left_events < d0 {
                continue;
            }
            let stat = logrank_from_buckets(&s.d_total, &s.c_total, &s.d_left, &s.c_left);
            let mask = (gray << 1) as u32;
            let labels = &s.present_labels;
            offer(best, self.rng, stat, variable, || Candidate::Local {
                mask,
                labels: labels.clone(),
            });
        }
    }

    /// Up to `wanted` distinct random pairs over the full label set.
    fn sample_variable(
        &mut self,
        variable: usize,
        cases: &[u32],
        node_events: f64,
        wanted: u64,
        best: &mut Option<Best>,
    ) {
        let codes = self.data.codes[variable];
        let l = self.data.label_counts[variable];
        let d0 = self.params.min_events as f64;
        let mut seen: HashSet<ComplementaryPair> = HashSet::new();
        let max_attempts = 20 * wanted + 100;
        let mut attempts = 0;
        while (seen.len() as u64) < wanted && attempts < max_attempts {
            attempts += 1;
            let pair = sample_pair(l, self.rng).expect("label count >= 2");
            if seen.contains(&pair) {
                continue;
            }
            seen.insert(pair.clone());

            let s = &mut self.scratch;
            let n_left = s
                .present_labels
                .iter()
                .filter(|&&lab| pair.is_left(lab as usize))
                .count();
            if n_left == 0 || n_left == s.present_labels.len() {
                continue;
            }
            let m = s.event_times.len();
            s.d_left.clear();
            s.d_left.resize(m, 0.0);
            s.c_left.clear();
            s.c_left.resize(m, 0.0);
            let mut left_events = 0.0;
            for (pos, &i) in cases.iter().enumerate() {
                let k = s.bucket[pos];
                let i = i as usize;
                if k < 0 || !pair.is_left(codes[i] as usize) {
                    continue;
                }
                let w = self.weights[i] as f64;
                s.c_left[k as usize] += w;
                if self.data.events[i] {
                    s.d_left[k as usize] += w;
                    left_events += w;
                }
            }
            if left_events < d0 || node_events - left_events < d0 {
                continue;
            }
            let stat = logrank_from_buckets(&s.d_total, &s.c_total, &s.d_left, &s.c_left);
            offer(best, self.rng, stat, variable, || Candidate::Pair(pair));
        }
    }
}

/// Keep the maximal statistic, breaking ties uniformly at random
/// (reservoir sampling over the tied candidates).
fn offer<R: Rng + ?Sized>(
    best: &mut Option<Best>,
    rng: &mut R,
    stat: f64,
    variable: usize,
    candidate: impl FnOnce() -> Candidate,
) {
    match best {
        None => {
            *best = Some(Best {
                stat,
                variable,
                candidate: candidate(),
                ties: 1,
            })
        }
        Some(b) => {
            let tol = TIE_TOLERANCE * b.stat.abs().max(1.0);
            if stat > b.stat + tol {
                *best = Some(Best {
                    stat,
                    variable,
                    candidate: candidate(),
                    ties: 1,
                });
            } else if stat >= b.stat - tol {
                b.ties += 1;
                if rng.random_range(0..b.ties) == 0 {
                    b.variable = variable;
                    b.candidate = candidate();
                }
            }
        }
    }
}
