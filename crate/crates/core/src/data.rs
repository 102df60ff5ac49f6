//! Experiment data model: run records, baselines, schema, and context slicing.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize, Serializer};
use thiserror::Error;

use crate::stats::{human_normalize, ScoreMatrix, StatsError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error("line {line}, column {column}: {message}")]
    Malformed {
        line: u64,
        column: String,
        message: String,
    },
    #[error("line {line}: unknown {field} {value:?} (not declared in schema)")]
    UnknownIdentifier {
        line: u64,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: duplicate run {key} (first seen on line {first_line})")]
    DuplicateKey {
        line: u64,
        first_line: u64,
        key: String,
    },
    #[error("line {line}: no baseline for environment {environment:?}")]
    MissingBaseline { line: u64, environment: String },
    #[error("line {line}: non-finite final_score {value}")]
    NonFiniteScore { line: u64, value: f64 },
    #[error("baseline for {environment:?}: {message}")]
    InvalidBaseline {
        environment: String,
        message: String,
    },
    #[error("schema: {0}")]
    InvalidSchema(String),
    #[error("hyper-parameter {0:?} is not declared in the schema")]
    UnknownHyperparameter(String),
    #[error("invalid context: {0}")]
    InvalidContext(String),
    #[error("no records match {0}")]
    EmptySlice(String),
    #[error("normalizing scores for {environment:?}: {source}")]
    Normalization {
        environment: String,
        source: StatsError,
    },
}

/// The three coordinates that define a training regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Agent,
    Environment,
    DataRegime,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Agent, Axis::Environment, Axis::DataRegime];

    pub fn name(self) -> &'static str {
        match self {
            Axis::Agent => "agent",
            Axis::Environment => "environment",
            Axis::DataRegime => "data_regime",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One training run's final score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub agent: String,
    pub environment: String,
    pub data_regime: String,
    pub hyperparameter: String,
    /// Compared by exact string match; `"0.5"` and `"0.50"` are different values.
    pub value: String,
    pub seed: u64,
    pub final_score: f64,
}

impl RunRecord {
    pub fn coordinate(&self, axis: Axis) -> &str {
        match axis {
            Axis::Agent => &self.agent,
            Axis::Environment => &self.environment,
            Axis::DataRegime => &self.data_regime,
        }
    }

    fn key(&self) -> (&str, &str, &str, &str, &str, u64) {
        (
            &self.agent,
            &self.environment,
            &self.data_regime,
            &self.hyperparameter,
            &self.value,
            self.seed,
        )
    }

    fn describe_key(&self) -> String {
        format!(
            "({}, {}, {}, {}={}, seed {})",
            self.agent,
            self.environment,
            self.data_regime,
            self.hyperparameter,
            self.value,
            self.seed
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub random_score: f64,
    pub human_score: f64,
}

/// Random and human reference scores per environment.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BaselineTable {
    entries: BTreeMap<String, Baseline>,
}

impl BaselineTable {
    pub fn new<I: IntoIterator<Item = (String, Baseline)>>(entries: I) -> Result<Self, DataError> {
        let mut table = BTreeMap::new();
        for (environment, b) in entries {
            let invalid = |message: &str| DataError::InvalidBaseline {
                environment: environment.clone(),
                message: message.to_owned(),
            };
            if !b.random_score.is_finite() || !b.human_score.is_finite() {
                return Err(invalid("scores must be finite"));
            }
            if b.random_score == b.human_score {
                return Err(invalid("human_score equals random_score"));
            }
            if table.contains_key(&environment) {
                return Err(invalid("listed more than once"));
            }
            table.insert(environment, b);
        }
        Ok(Self { entries: table })
    }

    pub fn get(&self, environment: &str) -> Option<&Baseline> {
        self.entries.get(environment)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Baseline)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn normalize(&self, environment: &str, score: f64) -> Result<f64, DataError> {
        let b = self
            .get(environment)
            .ok_or_else(|| DataError::MissingBaseline {
                line: 0,
                environment: environment.to_owned(),
            })?;
        human_normalize(score, b.random_score, b.human_score).map_err(|source| {
            DataError::Normalization {
                environment: environment.to_owned(),
                source,
            }
        })
    }
}

/// Declared identifier vocabularies.
///
/// An empty value list for a hyper-parameter leaves its values unconstrained.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub agents: Vec<String>,
    pub environments: Vec<String>,
    pub data_regimes: Vec<String>,
    pub hyperparameters: BTreeMap<String, Vec<String>>,
}

fn first_duplicate(items: &[String]) -> Option<&String> {
    let mut seen = BTreeSet::new();
    items.iter().find(|s| !seen.insert(s.as_str()))
}

impl Schema {
    pub fn validate(&self) -> Result<(), DataError> {
        for axis in Axis::ALL {
            if let Some(dup) = first_duplicate(self.declared(axis)) {
                return Err(DataError::InvalidSchema(format!(
                    "{axis} {dup:?} declared twice"
                )));
            }
        }
        for (hp, values) in &self.hyperparameters {
            if let Some(dup) = first_duplicate(values) {
                return Err(DataError::InvalidSchema(format!(
                    "value {dup:?} of {hp:?} declared twice"
                )));
            }
        }
        Ok(())
    }

    pub fn declared(&self, axis: Axis) -> &[String] {
        match axis {
            Axis::Agent => &self.agents,
            Axis::Environment => &self.environments,
            Axis::DataRegime => &self.data_regimes,
        }
    }

    pub fn values(&self, hyperparameter: &str) -> Option<&[String]> {
        self.hyperparameters.get(hyperparameter).map(Vec::as_slice)
    }

    fn allows_value(&self, hyperparameter: &str, value: &str) -> bool {
        self.values(hyperparameter)
            .is_some_and(|vs| vs.is_empty() || vs.iter().any(|v| v == value))
    }
}

/// Selector for a fixed context coordinate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Selector {
    Fixed(String),
    /// Pool every environment; each environment becomes a bootstrap stratum.
    All,
}

impl Selector {
    fn matches(&self, id: &str) -> bool {
        match self {
            Selector::Fixed(s) => s == id,
            Selector::All => true,
        }
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Fixed(s) => f.write_str(s),
            Selector::All => f.write_str("*"),
        }
    }
}

impl Serialize for Selector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// The fixed coordinates of an analysis context plus the axis that varies.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ContextKey {
    varying: Axis,
    #[serde(skip_serializing_if = "Option::is_none")]
    agent: Option<Selector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    environment: Option<Selector>,
    #[serde(skip_serializing_if = "Option::is_none")]
    data_regime: Option<Selector>,
}

impl ContextKey {
    /// Exactly the two non-varying axes must be given. Only the environment
    /// axis may be pooled with [`Selector::All`].
    pub fn new<I: IntoIterator<Item = (Axis, Selector)>>(
        varying: Axis,
        fixed: I,
    ) -> Result<Self, DataError> {
        let mut key = ContextKey {
            varying,
            agent: None,
            environment: None,
            data_regime: None,
        };
        for (axis, sel) in fixed {
            if axis == varying {
                return Err(DataError::InvalidContext(format!(
                    "{axis} is the varying axis and cannot be fixed"
                )));
            }
            if sel == Selector::All && axis != Axis::Environment {
                return Err(DataError::InvalidContext(format!(
                    "only environments can be pooled, not {axis}"
                )));
            }
            let slot = key.slot(axis);
            if slot.is_some() {
                return Err(DataError::InvalidContext(format!("{axis} fixed twice")));
            }
            *slot = Some(sel);
        }
        if let Some(axis) = Axis::ALL
            .into_iter()
            .find(|a| *a != varying && key.selector(*a).is_none())
        {
            return Err(DataError::InvalidContext(format!("{axis} must be fixed")));
        }
        Ok(key)
    }

    fn slot(&mut self, axis: Axis) -> &mut Option<Selector> {
        match axis {
            Axis::Agent => &mut self.agent,
            Axis::Environment => &mut self.environment,
            Axis::DataRegime => &mut self.data_regime,
        }
    }

    pub fn varying(&self) -> Axis {
        self.varying
    }

    pub fn selector(&self, axis: Axis) -> Option<&Selector> {
        match axis {
            Axis::Agent => self.agent.as_ref(),
            Axis::Environment => self.environment.as_ref(),
            Axis::DataRegime => self.data_regime.as_ref(),
        }
    }

    /// Whether a record lies in this context's fixed coordinates.
    pub fn matches(&self, record: &RunRecord) -> bool {
        Axis::ALL
            .into_iter()
            .filter_map(|a| self.selector(a).map(|s| (a, s)))
            .all(|(a, s)| s.matches(record.coordinate(a)))
    }
}

impl fmt::Display for ContextKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for axis in Axis::ALL {
            if let Some(sel) = self.selector(axis) {
                if !first {
                    f.write_str(", ")?;
                }
                write!(f, "{axis}={sel}")?;
                first = false;
            }
        }
        write!(f, " (varying {})", self.varying)
    }
}

/// A validated, immutable collection of runs.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepDataset {
    records: Vec<RunRecord>,
    baselines: BaselineTable,
    schema: Schema,
    by_hyperparameter: BTreeMap<String, Vec<usize>>,
}

impl SweepDataset {
    /// Validates records numbered from line 1.
    pub fn new(
        records: Vec<RunRecord>,
        baselines: BaselineTable,
        schema: Schema,
    ) -> Result<Self, DataError> {
        let rows = records
            .into_iter()
            .enumerate()
            .map(|(i, r)| (i as u64 + 1, r));
        Self::from_rows(rows, baselines, schema)
    }

    /// Validates records tagged with the source line used in diagnostics.
    pub fn from_rows<I>(
        rows: I,
        baselines: BaselineTable,
        schema: Schema,
    ) -> Result<Self, DataError>
    where
        I: IntoIterator<Item = (u64, RunRecord)>,
    {
        schema.validate()?;
        let mut records = Vec::new();
        let mut seen: BTreeMap<(String, String, String, String, String, u64), u64> =
            BTreeMap::new();
        for (line, rec) in rows {
            for axis in Axis::ALL {
                let id = rec.coordinate(axis);
                if !schema.declared(axis).iter().any(|d| d == id) {
                    return Err(DataError::UnknownIdentifier {
                        line,
                        field: axis.name(),
                        value: id.to_owned(),
                    });
                }
            }
            if schema.values(&rec.hyperparameter).is_none() {
                return Err(DataError::UnknownIdentifier {
                    line,
                    field: "hyperparameter",
                    value: rec.hyperparameter.clone(),
                });
            }
            if !schema.allows_value(&rec.hyperparameter, &rec.value) {
                return Err(DataError::UnknownIdentifier {
                    line,
                    field: "value",
                    value: rec.value.clone(),
                });
            }
            if !rec.final_score.is_finite() {
                return Err(DataError::NonFiniteScore {
                    line,
                    value: rec.final_score,
                });
            }
            if baselines.get(&rec.environment).is_none() {
                return Err(DataError::MissingBaseline {
                    line,
                    environment: rec.environment.clone(),
                });
            }
            let (a, e, d, h, v, s) = rec.key();
            let key = (
                a.to_owned(),
                e.to_owned(),
                d.to_owned(),
                h.to_owned(),
                v.to_owned(),
                s,
            );
            if let Some(first_line) = seen.insert(key, line) {
                return Err(DataError::DuplicateKey {
                    line,
                    first_line,
                    key: rec.describe_key(),
                });
            }
            records.push(rec);
        }
        let mut by_hyperparameter: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            by_hyperparameter
                .entry(r.hyperparameter.clone())
                .or_default()
                .push(i);
        }
        Ok(Self {
            records,
            baselines,
            schema,
            by_hyperparameter,
        })
    }

    pub fn records(&self) -> &[RunRecord] {
        &self.records
    }

    pub fn baselines(&self) -> &BaselineTable {
        &self.baselines
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Hyper-parameters that have at least one record, in name order.
    pub fn hyperparameters(&self) -> impl Iterator<Item = &str> {
        self.by_hyperparameter.keys().map(String::as_str)
    }

    /// Records of one hyper-parameter.
    pub fn records_for<'a>(
        &'a self,
        hyperparameter: &str,
    ) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.by_hyperparameter
            .get(hyperparameter)
            .into_iter()
            .flatten()
            .map(move |&i| &self.records[i])
    }

    /// Identifiers on `axis` that occur in the records, in schema order.
    pub fn present(&self, axis: Axis) -> Vec<&str> {
        let used: BTreeSet<&str> = self.records.iter().map(|r| r.coordinate(axis)).collect();
        self.schema
            .declared(axis)
            .iter()
            .map(String::as_str)
            .filter(|id| used.contains(id))
            .collect()
    }
}

/// Seeds of one environment within a group, ordered by seed number.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stratum {
    pub environment: String,
    pub seeds: Vec<u64>,
    pub scores: Vec<f64>,
}

/// Raw final scores of one (context label, value) pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScoreGroup {
    pub context: String,
    pub value: String,
    pub strata: Vec<Stratum>,
}

impl ScoreGroup {
    pub fn seed_count(&self) -> usize {
        self.strata.iter().map(|s| s.scores.len()).sum()
    }

    /// Raw scores, stratum by stratum.
    pub fn scores(&self) -> Vec<f64> {
        self.strata
            .iter()
            .flat_map(|s| s.scores.iter().copied())
            .collect()
    }

    /// Human-normalized scores with one row per environment.
    pub fn normalized(&self, baselines: &BaselineTable) -> Result<ScoreMatrix, DataError> {
        let rows = self
            .strata
            .iter()
            .map(|s| {
                s.scores
                    .iter()
                    .map(|&x| baselines.normalize(&s.environment, x))
                    .collect()
            })
            .collect::<Result<Vec<Vec<f64>>, _>>()?;
        ScoreMatrix::new(rows).map_err(|source| DataError::Normalization {
            environment: self
                .strata
                .first()
                .map(|s| s.environment.clone())
                .unwrap_or_default(),
            source,
        })
    }
}

/// Per-(context label, value) score groups for one hyper-parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Slice {
    pub hyperparameter: String,
    pub context: ContextKey,
    /// Labels on the varying axis with at least one matching record.
    pub contexts: Vec<String>,
    /// The hyper-parameter's values: schema order, or sorted when unconstrained.
    pub values: Vec<String>,
    /// Every context × value pair, context-major; groups without runs are kept
    /// with no strata.
    pub groups: Vec<ScoreGroup>,
}

impl Slice {
    pub fn group(&self, context: &str, value: &str) -> Option<&ScoreGroup> {
        self.groups
            .iter()
            .find(|g| g.context == context && g.value == value)
    }
}

/// Groups the scores of `hyperparameter` within `context`.
pub fn slice(
    dataset: &SweepDataset,
    context: &ContextKey,
    hyperparameter: &str,
) -> Result<Slice, DataError> {
    let declared = dataset
        .schema
        .values(hyperparameter)
        .ok_or_else(|| DataError::UnknownHyperparameter(hyperparameter.to_owned()))?;
    let matching: Vec<&RunRecord> = dataset
        .records_for(hyperparameter)
        .filter(|r| context.matches(r))
        .collect();
    if matching.is_empty() {
        return Err(DataError::EmptySlice(format!(
            "{hyperparameter} in {context}"
        )));
    }
    let varying = context.varying();
    let used: BTreeSet<&str> = matching.iter().map(|r| r.coordinate(varying)).collect();
    let contexts: Vec<String> = dataset
        .schema
        .declared(varying)
        .iter()
        .filter(|id| used.contains(id.as_str()))
        .cloned()
        .collect();
    let values: Vec<String> = if declared.is_empty() {
        let observed: BTreeSet<&str> = matching.iter().map(|r| r.value.as_str()).collect();
        observed.into_iter().map(ToString::to_string).collect()
    } else {
        declared.to_vec()
    };

    type Cell<'a> = (&'a str, &'a str, &'a str);
    let mut cells: BTreeMap<Cell<'_>, Vec<(u64, f64)>> = BTreeMap::new();
    for r in &matching {
        cells
            .entry((
                r.coordinate(varying),
                r.value.as_str(),
                r.environment.as_str(),
            ))
            .or_default()
            .push((r.seed, r.final_score));
    }
    let environments = dataset.schema.declared(Axis::Environment);
    let mut groups = Vec::with_capacity(contexts.len() * values.len());
    for ctx in &contexts {
        for value in &values {
            let strata = environments
                .iter()
                .filter_map(|env| {
                    let mut runs = cells
                        .get(&(ctx.as_str(), value.as_str(), env.as_str()))?
                        .clone();
                    runs.sort_by_key(|(seed, _)| *seed);
                    Some(Stratum {
                        environment: env.clone(),
                        seeds: runs.iter().map(|(s, _)| *s).collect(),
                        scores: runs.iter().map(|(_, x)| *x).collect(),
                    })
                })
                .collect();
            groups.push(ScoreGroup {
                context: ctx.clone(),
                value: value.clone(),
                strata,
            });
        }
    }
    Ok(Slice {
        hyperparameter: hyperparameter.to_owned(),
        context: context.clone(),
        contexts,
        values,
        groups,
    })
}
