//! Counting-process estimators for a single node: the risk table, the
//! Nelson-Aalen cumulative hazard, the Kaplan-Meier product-limit curve and
//! the two-sample log-rank statistic.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Right-continuous piecewise-constant function of time.
///
/// `eval(t)` returns the value attached to the last jump time `<= t`, or
/// `initial_value` before the first jump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    times: Vec<f64>,
    values: Vec<f64>,
    initial_value: f64,
}

impl StepFunction {
    pub fn new(times: Vec<f64>, values: Vec<f64>, initial_value: f64) -> Result<Self> {
        if times.len() != values.len() {
            return Err(invalid("step function needs one value per jump time"));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(invalid("step function jump times must be finite"));
        }
        if times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("step function jump times must be strictly increasing"));
        }
        Ok(Self {
            times,
            values,
            initial_value,
        })
    }

    pub fn constant(value: f64) -> Self {
        Self {
            times: Vec::new(),
            values: Vec::new(),
            initial_value: value,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn initial_value(&self) -> f64 {
        self.initial_value
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s <= t) {
            0 => self.initial_value,
            k => self.values[k - 1],
        }
    }

    /// Value on the open interval just before `t`.
    pub fn left_limit(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s < t) {
            0 => self.initial_value,
            k => self.values[k - 1],
        }
    }

    /// Pointwise arithmetic mean, represented on the union of all jump times.
    ///
    /// Uses a running mean so that averaging identical functions reproduces
    /// them bit for bit.
    pub fn mean(parts: &[&StepFunction]) -> StepFunction {
        combine(parts, |vals| {
            let mut m = 0.0;
            for (k, v) in vals.iter().enumerate() {
                m += (v - m) / (k + 1) as f64;
            }
            m
        })
    }

    /// Pointwise weighted sum `sum_b w_b f_b(t)` on the union of jump times.
    pub fn weighted_sum(parts: &[(f64, &StepFunction)]) -> StepFunction {
        let weights: Vec<f64> = parts.iter().map(|(w, _)| *w).collect();
        let fns: Vec<&StepFunction> = parts.iter().map(|(_, f)| *f).collect();
        combine(&fns, |vals| vals.iter().zip(&weights).map(|(v, w)| v * w).sum())
    }

    /// Apply `f` to every value, keeping the jump times.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> StepFunction {
        StepFunction {
            times: self.times.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            initial_value: f(self.initial_value),
        }
    }
}

fn combine(parts: &[&StepFunction], reduce: impl Fn(&[f64]) -> f64) -> StepFunction {
    let mut times: Vec<f64> = parts.iter().flat_map(|p| p.times.iter().copied()).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();

    let mut current: Vec<f64> = parts.iter().map(|p| p.initial_value).collect();
    let initial_value = reduce(&current);
    let mut cursor = vec![0usize; parts.len()];
    let mut values = Vec::with_capacity(times.len());
    for &t in &times {
        for (j, p) in parts.iter().enumerate() {
            while cursor[j] < p.times.len() && p.times[cursor[j]] <= t {
                current[j] = p.values[cursor[j]];
                cursor[j] += 1;
            }
        }
        values.push(reduce(&current));
    }
    StepFunction {
        times,
        values,
        initial_value,
    }
}

/// Distinct event times of a node with their event and at-risk counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    event_times: Vec<f64>,
    events: Vec<u32>,
    at_risk: Vec<u32>,
}

impl RiskTable {
    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    pub fn events(&self) -> &[u32] {
        &self.events
    }

    pub fn at_risk(&self) -> &[u32] {
        &self.at_risk
    }

    pub fn total_events(&self) -> u64 {
        self.events.iter().map(|&d| d as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.event_times.is_empty()
    }

    /// Nelson-Aalen increments `d_l / Y_l`; both estimators are built from
    /// these so they agree on the product-integral identity exactly.
    pub fn hazard_increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().zip(&self.at_risk).map(|(&d, &y)| {
            assert!(y > 0, "risk table lists an event time with nobody at risk");
            d as f64 / y as f64
        })
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.event_times.len();
        if self.events.len() != n || self.at_risk.len() != n {
            return Err(invalid("risk table columns differ in length"));
        }
        if self.event_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("risk table event times must be strictly increasing"));
        }
        if self.at_risk.windows(2).any(|w| w[0] < w[1]) {
            return Err(invalid("risk table at-risk counts must be non-increasing"));
        }
        if self
            .events
            .iter()
            .zip(&self.at_risk)
            .any(|(&d, &y)| d == 0 || d > y)
        {
            return Err(invalid("risk table needs 1 <= d <= Y at every event time"));
        }
        Ok(())
    }
}

/// Risk table for an unweighted sample.
pub fn build_risk_table(times: &[f64], events: &[bool]) -> Result<RiskTable> {
    if times.len() != events.len() {
        return Err(invalid("times and statuses differ in length"));
    }
    if times.is_empty() {
        return Err(Error::Empty);
    }
    let weights = vec![1u32; times.len()];
    Ok(build_weighted_risk_table(times, events, &weights))
}

/// Risk table where observation `i` is replicated `weights[i]` times.
///
/// Censored observations tied with an event time stay in that time's risk set.
pub fn build_weighted_risk_table(times: &[f64], events: &[bool], weights: &[u32]) -> RiskTable {
    let mut order: Vec<usize> = (0..times.len()).filter(|&i| weights[i] > 0).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let total: u32 = order.iter().map(|&i| weights[i]).sum();
    let mut table = RiskTable {
        event_times: Vec::new(),
        events: Vec::new(),
        at_risk: Vec::new(),
    };
    let mut removed = 0u32;
    let mut k = 0;
    while k < order.len() {
        let t = times[order[k]];
        let mut d = 0u32;
        let mut n_at_t = 0u32;
        while k < order.len() && times[order[k]] == t {
            let i = order[k];
            n_at_t += weights[i];
            if events[i] {
                d += weights[i];
            }
            k += 1;
        }
        if d > 0 {
            table.event_times.push(t);
            table.events.push(d);
            table.at_risk.push(total - removed);
        }
        removed += n_at_t;
    }
    table
}

/// Nelson-Aalen cumulative hazard: `H(t) = sum_{t_l <= t} d_l / Y_l`.
pub fn nelson_aalen(rt: &RiskTable) -> StepFunction {
    let mut h = 0.0;
    let values = rt
        .hazard_increments()
        .map(|inc| {
            h += inc;
            h
        })
        .collect();
    StepFunction {
        times: rt.event_times.clone(),
        values,
        initial_value: 0.0,
    }
}

/// Kaplan-Meier product-limit survival: `S(t) = prod_{t_l <= t} (1 - d_l / Y_l)`.
pub fn kaplan_meier(rt: &RiskTable) -> StepFunction {
    let mut s = 1.0;
    let values = rt
        .hazard_increments()
        .map(|inc| {
            s *= 1.0 - inc;
            s
        })
        .collect();
    StepFunction {
        times: rt.event_times.clone(),
        values,
        initial_value: 1.0,
    }
}

/// One group of a two-sample comparison.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a> {
    pub times: &'a [f64],
    pub events: &'a [bool],
}

impl<'a> Sample<'a> {
    pub fn new(times: &'a [f64], events: &'a [bool]) -> Self {
        Self { times, events }
    }
}

/// Standardized two-sample log-rank statistic `|O - E| / sqrt(V)` for the
/// left group, with hypergeometric variance over the pooled event times.
pub fn logrank_statistic(left: Sample<'_>, right: Sample<'_>) -> Result<f64> {
    if left.times.len() != left.events.len() || right.times.len() != right.events.len() {
        return Err(invalid("times and statuses differ in length"));
    }
    if left.times.is_empty() || right.times.is_empty() {
        return Err(Error::InadmissibleSplit("a daughter is empty"));
    }
    let mut pooled: Vec<f64> = left
        .times
        .iter()
        .zip(left.events)
        .chain(right.times.iter().zip(right.events))
        .filter(|(_, &e)| e)
        .map(|(&t, _)| t)
        .collect();
    if pooled.is_empty() {
        return Err(Error::InsufficientEvents {
            required: 1,
            found: 0,
        });
    }
    pooled.sort_by(f64::total_cmp);
    pooled.dedup();

    let tally = |s: Sample<'_>, d: &mut [f64], c: &mut [f64]| {
        for (&t, &e) in s.times.iter().zip(s.events) {
            // bucket: last pooled event time <= t
            let k = pooled.partition_point(|&p| p <= t);
            if k == 0 {
                continue;
            }
            c[k - 1] += 1.0;
            if e {
                d[k - 1] += 1.0;
            }
        }
    };
    let m = pooled.len();
    let (mut d_left, mut c_left) = (vec![0.0; m], vec![0.0; m]);
    let (mut d_right, mut c_right) = (vec![0.0; m], vec![0.0; m]);
    tally(left, &mut d_left, &mut c_left);
    tally(right, &mut d_right, &mut c_right);

    let d_total: Vec<f64> = d_left.iter().zip(&d_right).map(|(a, b)| a + b).collect();
    let c_total: Vec<f64> = c_left.iter().zip(&c_right).map(|(a, b)| a + b).collect();
    Ok(logrank_from_buckets(&d_total, &c_total, &d_left, &c_left))
}

/// Log-rank statistic from per-event-time buckets.
///
/// Bucket `k` holds the (weighted) cases whose time lies in
/// `[t_k, t_{k+1})`, so at-risk counts are suffix sums of `c`; `d` are the
/// events at `t_k`. Cases observed before the first event time are never at
/// risk and must be left out by the caller.
pub(crate) fn logrank_from_buckets(
    d_total: &[f64],
    c_total: &[f64],
    d_left: &[f64],
    c_left: &[f64],
) -> f64 {
    let mut y = 0.0;
    let mut y_left = 0.0;
    let mut num = 0.0;
    let mut var = 0.0;
    for k in (0..d_total.len()).rev() {
        y += c_total[k];
        y_left += c_left[k];
        let d = d_total[k];
        if d == 0.0 || y <= 0.0 {
            continue;
        }
        let frac = y_left / y;
        num += d_left[k] - d * frac;
        if y > 1.0 {
            var += d * frac * (1.0 - frac) * (y - d) / (y - 1.0);
        }
    }
    if var > 0.0 {
        num.abs() / var.sqrt()
    } else {
        0.0
    }
}
