//! Survival datasets over factor features: CSV ingestion, discretization of
//! continuous columns into factors, and noise-variable injection.

use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// One nominal variable. `cut_points` is present for variables produced by
/// [`Dataset::discretize`] and lets raw numeric values be binned later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorVariable {
    pub name: String,
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut_points: Option<Vec<f64>>,
}

impl FactorVariable {
    pub fn new(name: impl Into<String>, labels: Vec<String>) -> Self {
        Self {
            name: name.into(),
            labels,
            cut_points: None,
        }
    }

    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    /// A single-label variable can never be split on.
    pub fn is_degenerate(&self) -> bool {
        self.labels.len() < 2
    }

    /// Map a raw cell to a label index: exact label match first, then, for
    /// discretized variables, binning of a numeric value by the cut points.
    pub fn encode(&self, cell: &str) -> Option<u32> {
        let cell = cell.trim();
        if let Some(k) = self.labels.iter().position(|l| l == cell) {
            return Some(k as u32);
        }
        let cuts = self.cut_points.as_ref()?;
        let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite())?;
        Some(bin_of(cuts, v))
    }
}

fn bin_of(cuts: &[f64], v: f64) -> u32 {
    cuts.partition_point(|&c| c < v) as u32
}

/// Ordered list of factor variables; the sidecar that travels with a model.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FactorSchema {
    pub variables: Vec<FactorVariable>,
}

impl FactorSchema {
    pub fn new(variables: Vec<FactorVariable>) -> Result<Self> {
        let schema = Self { variables };
        schema.validate()?;
        Ok(schema)
    }

    pub fn len(&self) -> usize {
        self.variables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.variables.is_empty()
    }

    pub fn label_counts(&self) -> Vec<usize> {
        self.variables.iter().map(|v| v.label_count()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.variables.iter().position(|v| v.name == name)
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashMap::new();
        for v in &self.variables {
            if seen.insert(v.name.as_str(), ()).is_some() {
                return Err(Error::Variable(v.name.clone(), "duplicate name".into()));
            }
            if v.labels.is_empty() {
                return Err(Error::Variable(v.name.clone(), "no labels".into()));
            }
            let mut labels: Vec<&String> = v.labels.iter().collect();
            labels.sort();
            if labels.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::Variable(v.name.clone(), "duplicate label".into()));
            }
        }
        Ok(())
    }

    /// Check a feature vector against the label counts.
    pub fn check_features(&self, x: &[u32]) -> Result<()> {
        if x.len() != self.variables.len() {
            return Err(invalid(format!(
                "feature vector has {} entries, schema has {} variables",
                x.len(),
                self.variables.len()
            )));
        }
        for (v, &label) in self.variables.iter().zip(x) {
            if label as usize >= v.label_count() {
                return Err(Error::LabelOutOfRange {
                    label: label as usize,
                    label_count: v.label_count(),
                });
            }
        }
        Ok(())
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let schema: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        schema.validate()?;
        Ok(schema)
    }
}

/// One observation: observed time, event indicator and factor labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalRecord {
    pub time: f64,
    pub event: bool,
    pub features: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Factor {
        variable: FactorVariable,
        codes: Vec<u32>,
    },
    /// Raw numeric values awaiting [`Dataset::discretize`].
    Pending { name: String, values: Vec<f64> },
}

impl Column {
    pub fn name(&self) -> &str {
        match self {
            Column::Factor { variable, .. } => &variable.name,
            Column::Pending { name, .. } => name,
        }
    }

    fn len(&self) -> usize {
        match self {
            Column::Factor { codes, .. } => codes.len(),
            Column::Pending { values, .. } => values.len(),
        }
    }
}

/// Learning data: times, event indicators and feature columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    time_name: String,
    status_name: String,
    times: Vec<f64>,
    events: Vec<bool>,
    columns: Vec<Column>,
}

impl Dataset {
    pub fn new(
        time_name: impl Into<String>,
        status_name: impl Into<String>,
        times: Vec<f64>,
        events: Vec<bool>,
        columns: Vec<Column>,
    ) -> Result<Self> {
        let n = times.len();
        if events.len() != n {
            return Err(invalid("times and statuses differ in length"));
        }
        if let Some(i) = times.iter().position(|t| !(t.is_finite() && *t >= 0.0)) {
            return Err(invalid(format!("record {i}: time must be finite and >= 0")));
        }
        let mut names: Vec<&str> = Vec::new();
        for c in &columns {
            if c.len() != n {
                return Err(Error::Variable(c.name().into(), "wrong number of rows".into()));
            }
            if names.contains(&c.name()) {
                return Err(Error::Variable(c.name().into(), "duplicate name".into()));
            }
            names.push(c.name());
            if let Column::Factor { variable, codes } = c {
                if variable.labels.is_empty() && n > 0 {
                    return Err(Error::Variable(c.name().into(), "no labels".into()));
                }
                if let Some(&bad) = codes.iter().find(|&&k| k as usize >= variable.label_count()) {
                    return Err(Error::LabelOutOfRange {
                        label: bad as usize,
                        label_count: variable.label_count(),
                    });
                }
            }
        }
        Ok(Self {
            time_name: time_name.into(),
            status_name: status_name.into(),
            times,
            events,
            columns,
        })
    }

    /// Build from records conforming to `schema`.
    pub fn from_records(schema: &FactorSchema, records: &[SurvivalRecord]) -> Result<Self> {
        schema.validate()?;
        let mut columns: Vec<Vec<u32>> = vec![Vec::with_capacity(records.len()); schema.len()];
        for r in records {
            schema.check_features(&r.features)?;
            for (col, &label) in columns.iter_mut().zip(&r.features) {
                col.push(label);
            }
        }
        let columns = schema
            .variables
            .iter()
            .cloned()
            .zip(columns)
            .map(|(variable, codes)| Column::Factor { variable, codes })
            .collect();
        Self::new(
            "time",
            "status",
            records.iter().map(|r| r.time).collect(),
            records.iter().map(|r| r.event).collect(),
            columns,
        )
    }

    pub fn time_name(&self) -> &str {
        &self.time_name
    }

    pub fn status_name(&self) -> &str {
        &self.status_name
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn events(&self) -> &[bool] {
        &self.events
    }

    pub fn n_events(&self) -> usize {
        self.events.iter().filter(|&&e| e).count()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name() == name)
    }

    pub fn pending_names(&self) -> Vec<String> {
        self.columns
            .iter()
            .filter(|c| matches!(c, Column::Pending { .. }))
            .map(|c| c.name().to_string())
            .collect()
    }

    /// Schema of the factor columns; fails while any column is pending.
    pub fn schema(&self) -> Result<FactorSchema> {
        self.columns
            .iter()
            .map(|c| match c {
                Column::Factor { variable, .. } => Ok(variable.clone()),
                Column::Pending { name, .. } => Err(Error::Variable(
                    name.clone(),
                    "still numeric; discretize before fitting".into(),
                )),
            })
            .collect::<Result<Vec<_>>>()
            .map(|variables| FactorSchema { variables })
    }

    /// Column-major label codes, one slice per variable.
    pub fn factor_codes(&self) -> Result<Vec<&[u32]>> {
        self.columns
            .iter()
            .map(|c| match c {
                Column::Factor { codes, .. } => Ok(codes.as_slice()),
                Column::Pending { name, .. } => Err(Error::Variable(
                    name.clone(),
                    "still numeric; discretize before fitting".into(),
                )),
            })
            .collect()
    }

    pub fn features(&self, i: usize) -> Result<Vec<u32>> {
        self.factor_codes()
            .map(|cols| cols.iter().map(|c| c[i]).collect())
    }

    pub fn record(&self, i: usize) -> Result<SurvivalRecord> {
        Ok(SurvivalRecord {
            time: self.times[i],
            event: self.events[i],
            features: self.features(i)?,
        })
    }

    /// Bin a pending numeric column into at most `labels` factor labels using
    /// equal-frequency cut points.
    ///
    /// Cut `k` is the inverse-ECDF quantile at `k / labels` (an observed
    /// value); repeated cuts collapse and a cut at the maximum is dropped, so
    /// every bin is populated. Bins are numbered in value order, a value `v`
    /// landing in the bin `#{cuts < v}`.
    pub fn discretize(mut self, variable: &str, labels: usize) -> Result<Self> {
        if labels < 2 {
            return Err(invalid(format!("granularity must be >= 2, got {labels}")));
        }
        let idx = self
            .columns
            .iter()
            .position(|c| c.name() == variable)
            .ok_or_else(|| Error::MissingColumn(variable.into()))?;
        let values = match &self.columns[idx] {
            Column::Pending { values, .. } => values,
            Column::Factor { .. } => {
                return Err(Error::Variable(variable.into(), "already a factor".into()))
            }
        };
        let cuts = quantile_cuts(values, labels);
        let codes: Vec<u32> = values.iter().map(|&v| bin_of(&cuts, v)).collect();
        let labels = bin_labels(values, &cuts);
        self.columns[idx] = Column::Factor {
            variable: FactorVariable {
                name: variable.into(),
                labels,
                cut_points: Some(cuts),
            },
            codes,
        };
        Ok(self)
    }

    /// Discretize every pending column to the same granularity.
    pub fn discretize_all(self, labels: usize) -> Result<Self> {
        self.pending_names()
            .iter()
            .try_fold(self, |ds, name| ds.discretize(name, labels))
    }

    /// Append `n_continuous` standard-normal columns (named `c1`, `c2`, ...,
    /// left pending discretization) and `n_discrete` fair-coin binary
    /// factors (named `d1`, `d2`, ...).
    pub fn inject_noise<R: Rng + ?Sized>(
        mut self,
        n_continuous: usize,
        n_discrete: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if self.is_empty() {
            return Err(Error::Empty);
        }
        let n = self.len();
        for k in 1..=n_continuous {
            let values: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
            self.push_column(Column::Pending {
                name: format!("c{k}"),
                values,
            })?;
        }
        for k in 1..=n_discrete {
            let codes: Vec<u32> = (0..n).map(|_| rng.random_bool(0.5) as u32).collect();
            self.push_column(Column::Factor {
                variable: FactorVariable::new(format!("d{k}"), vec!["0".into(), "1".into()]),
                codes,
            })?;
        }
        Ok(self)
    }

    fn push_column(&mut self, column: Column) -> Result<()> {
        if self.column(column.name()).is_some() {
            return Err(Error::Variable(column.name().into(), "duplicate name".into()));
        }
        self.columns.push(column);
        Ok(())
    }

    /// Parse a table. Time and status columns are taken by name; every other
    /// column becomes a factor when it is non-numeric, listed in
    /// `factor_columns`, or numeric with at most `max_factor_levels` distinct
    /// values. Remaining numeric columns are loaded pending discretization.
    pub fn from_table(table: &RawTable, options: &CsvOptions) -> Result<Self> {
        let (time_idx, status_idx) = table.time_status_indices(options)?;
        let (times, events) = table.parse_time_status(time_idx, status_idx)?;

        let mut columns = Vec::new();
        for (j, name) in table.header.iter().enumerate() {
            if j == time_idx || j == status_idx {
                continue;
            }
            let cells: Vec<&str> = table.rows.iter().map(|r| r[j].trim()).collect();
            if let Some(row) = cells.iter().position(|c| is_missing(c)) {
                return Err(Error::Cell {
                    row: row + 1,
                    column: name.clone(),
                    message: "missing value".into(),
                });
            }
            let numeric: Option<Vec<f64>> = cells
                .iter()
                .map(|c| c.parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect();
            let as_factor = match &numeric {
                None => true,
                Some(values) => {
                    options.factor_columns.iter().any(|f| f == name)
                        || distinct_count(values) <= options.max_factor_levels
                }
            };
            if as_factor {
                let mut labels: Vec<String> = Vec::new();
                let mut index: HashMap<&str, u32> = HashMap::new();
                let codes = cells
                    .iter()
                    .map(|&c| {
                        *index.entry(c).or_insert_with(|| {
                            labels.push(c.to_string());
                            (labels.len() - 1) as u32
                        })
                    })
                    .collect();
                columns.push(Column::Factor {
                    variable: FactorVariable::new(name.clone(), labels),
                    codes,
                });
            } else {
                columns.push(Column::Pending {
                    name: name.clone(),
                    values: numeric.unwrap_or_default(),
                });
            }
        }
        Self::new(
            options.time_col.clone(),
            options.status_col.clone(),
            times,
            events,
            columns,
        )
    }

    /// Parse a table with label mappings fixed by `schema`.
    pub fn from_table_with_schema(
        table: &RawTable,
        time_col: &str,
        status_col: &str,
        schema: &FactorSchema,
    ) -> Result<Self> {
        let options = CsvOptions::new(time_col, status_col);
        let (time_idx, status_idx) = table.time_status_indices(&options)?;
        let (times, events) = table.parse_time_status(time_idx, status_idx)?;
        let features = table.encode_features(schema)?;
        let columns = schema
            .variables
            .iter()
            .cloned()
            .zip(features)
            .map(|(variable, codes)| Column::Factor { variable, codes })
            .collect();
        Self::new(time_col, status_col, times, events, columns)
    }

    pub fn to_table(&self) -> RawTable {
        let mut header = vec![self.time_name.clone(), self.status_name.clone()];
        header.extend(self.columns.iter().map(|c| c.name().to_string()));
        let rows = (0..self.len())
            .map(|i| {
                let mut row = vec![
                    format!("{}", self.times[i]),
                    (self.events[i] as u8).to_string(),
                ];
                row.extend(self.columns.iter().map(|c| match c {
                    Column::Factor { variable, codes } => variable.labels[codes[i] as usize].clone(),
                    Column::Pending { values, .. } => format!("{}", values[i]),
                }));
                row
            })
            .collect();
        RawTable { header, rows }
    }
}

fn is_missing(cell: &str) -> bool {
    cell.is_empty() || cell.eq_ignore_ascii_case("na") || cell.eq_ignore_ascii_case("nan")
}

fn distinct_count(values: &[f64]) -> usize {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.len()
}

/// Equal-frequency cut points: inverse-ECDF quantiles at `k / labels`,
/// deduplicated, excluding any cut at the maximum.
fn quantile_cuts(values: &[f64], labels: usize) -> Vec<f64> {
    if values.is_empty() {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let max = sorted[n - 1];
    let mut cuts: Vec<f64> = (1..labels)
        .map(|k| {
            // smallest order statistic with ECDF >= k / labels
            let rank = (k * n).div_ceil(labels).max(1);
            sorted[rank - 1]
        })
        .filter(|&c| c < max)
        .collect();
    cuts.dedup();
    cuts
}

fn bin_labels(values: &[f64], cuts: &[f64]) -> Vec<String> {
    if cuts.is_empty() {
        return vec![values.first().map_or("all".into(), |v| format!("{v}"))];
    }
    let mut labels = vec![format!("<={}", cuts[0])];
    labels.extend(cuts.windows(2).map(|w| format!("({},{}]", w[0], w[1])));
    labels.push(format!(">{}", cuts[cuts.len() - 1]));
    labels
}

/// Column names and options for CSV ingestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvOptions {
    pub time_col: String,
    pub status_col: String,
    /// Numeric columns to treat as factors regardless of their level count.
    #[serde(default)]
    pub factor_columns: Vec<String>,
    /// Numeric columns with at most this many distinct values become factors.
    #[serde(default = "default_max_factor_levels")]
    pub max_factor_levels: usize,
}

fn default_max_factor_levels() -> usize {
    5
}

impl CsvOptions {
    pub fn new(time_col: impl Into<String>, status_col: impl Into<String>) -> Self {
        Self {
            time_col: time_col.into(),
            status_col: status_col.into(),
            factor_columns: Vec::new(),
            max_factor_levels: default_max_factor_levels(),
        }
    }
}

/// Header plus string cells, as read from a CSV file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
        if header.is_empty() || header.iter().all(|h| h.is_empty()) {
            return Err(Error::Empty);
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        if rows.is_empty() {
            return Err(Error::Empty);
        }
        Ok(Self { header, rows })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(&self.header)?;
        for row in &self.rows {
            writer.write_record(row)?;
        }
        writer.flush()?;
        Ok(())
    }

    fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.into()))
    }

    fn time_status_indices(&self, options: &CsvOptions) -> Result<(usize, usize)> {
        if self.rows.is_empty() {
            return Err(Error::Empty);
        }
        Ok((
            self.column_index(&options.time_col)?,
            self.column_index(&options.status_col)?,
        ))
    }

    fn parse_time_status(&self, time_idx: usize, status_idx: usize) -> Result<(Vec<f64>, Vec<bool>)> {
        let mut times = Vec::with_capacity(self.rows.len());
        let mut events = Vec::with_capacity(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            let cell = row[time_idx].trim();
            match cell.parse::<f64>() {
                Ok(t) if t.is_finite() && t >= 0.0 => times.push(t),
                _ => {
                    return Err(Error::Cell {
                        row: i + 1,
                        column: self.header[time_idx].clone(),
                        message: format!("time must be a non-negative number, got `{cell}`"),
                    })
                }
            }
            let cell = row[status_idx].trim();
            match cell.parse::<f64>() {
                Ok(s) if s == 0.0 => events.push(false),
                Ok(s) if s == 1.0 => events.push(true),
                _ => {
                    return Err(Error::Cell {
                        row: i + 1,
                        column: self.header[status_idx].clone(),
                        message: format!("status must be 0 or 1, got `{cell}`"),
                    })
                }
            }
        }
        Ok((times, events))
    }

    /// Column-major label codes for every schema variable; other columns
    /// are ignored.
    pub fn encode_features(&self, schema: &FactorSchema) -> Result<Vec<Vec<u32>>> {
        schema
            .variables
            .iter()
            .map(|v| {
                let j = self.column_index(&v.name)?;
                self.rows
                    .iter()
                    .enumerate()
                    .map(|(i, row)| {
                        v.encode(&row[j]).ok_or_else(|| Error::Cell {
                            row: i + 1,
                            column: v.name.clone(),
                            message: format!("unknown label `{}`", row[j].trim()),
                        })
                    })
                    .collect()
            })
            .collect()
    }
}

/// Load a CSV file into a dataset (see [`Dataset::from_table`]).
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<Dataset> {
    Dataset::from_table(&RawTable::read_csv(path)?, options)
}

pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    dataset.to_table().write_csv(path)
}
