//! Ranking of one hyper-parameter's values within a single context.

use thc_core::data::{slice, Axis, ContextKey, DataError, Selector, SweepDataset};
use thc_core::ranking::{compute_rankings, RankedSetting, RankingError, RankingMode};
use thc_core::stats::{IntervalEstimator, StatsError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RankError {
    #[error("unknown {field} {value:?}")]
    Unknown { field: &'static str, value: String },
    #[error("no runs of {hyperparameter} match {context}")]
    NoRuns {
        hyperparameter: String,
        context: String,
    },
    #[error("no value of {0} has enough seeds to rank")]
    NothingToRank(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Ranking(#[from] RankingError),
}

/// One fully fixed context.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankQuery<'a> {
    pub agent: &'a str,
    /// `None` pools every environment.
    pub environment: Option<&'a str>,
    pub data_regime: &'a str,
    pub hyperparameter: &'a str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOutcome {
    /// In initial-rank order.
    pub entries: Vec<RankedSetting>,
    pub warnings: Vec<String>,
}

pub fn rank_context<E: IntervalEstimator + ?Sized>(
    dataset: &SweepDataset,
    query: &RankQuery<'_>,
    estimator: &E,
    mode: RankingMode,
    min_seeds: usize,
) -> Result<RankOutcome, RankError> {
    let schema = dataset.schema();
    let check = |axis: Axis, id: &str| {
        if schema.declared(axis).iter().any(|d| d == id) {
            Ok(())
        } else {
            Err(RankError::Unknown {
                field: axis.name(),
                value: id.to_owned(),
            })
        }
    };
    check(Axis::Agent, query.agent)?;
    check(Axis::DataRegime, query.data_regime)?;
    if let Some(env) = query.environment {
        check(Axis::Environment, env)?;
    }
    if schema.values(query.hyperparameter).is_none() {
        return Err(RankError::Unknown {
            field: "hyperparameter",
            value: query.hyperparameter.to_owned(),
        });
    }
    let env = query
        .environment
        .map_or(Selector::All, |e| Selector::Fixed(e.to_owned()));
    let key = ContextKey::new(
        Axis::Agent,
        [
            (Axis::Environment, env),
            (
                Axis::DataRegime,
                Selector::Fixed(query.data_regime.to_owned()),
            ),
        ],
    )?;
    let describe = || {
        format!(
            "agent={}, environment={}, data_regime={}",
            query.agent,
            query.environment.unwrap_or("*"),
            query.data_regime
        )
    };
    let no_runs = || RankError::NoRuns {
        hyperparameter: query.hyperparameter.to_owned(),
        context: describe(),
    };
    let sl = match slice(dataset, &key, query.hyperparameter) {
        Ok(sl) => sl,
        Err(DataError::EmptySlice(_)) => return Err(no_runs()),
        Err(e) => return Err(e.into()),
    };
    let groups: Vec<_> = sl
        .groups
        .iter()
        .filter(|g| g.context == query.agent)
        .collect();
    if groups.iter().all(|g| g.seed_count() == 0) {
        return Err(no_runs());
    }

    let mut warnings = Vec::new();
    let mut settings = Vec::new();
    for g in groups {
        let n = g.seed_count();
        if n < min_seeds {
            warnings.push(format!(
                "{}={}: {n} seed(s) in {}, fewer than {min_seeds}; excluded",
                query.hyperparameter,
                g.value,
                describe()
            ));
            continue;
        }
        let estimate = estimator.estimate(&g.normalized(dataset.baselines())?)?;
        settings.push((g.value.as_str(), estimate.interval));
    }
    if settings.is_empty() {
        return Err(RankError::NothingToRank(query.hyperparameter.to_owned()));
    }
    Ok(RankOutcome {
        entries: compute_rankings(&settings, mode)?,
        warnings,
    })
}

/// `value,lower,upper,initial_rank,final_rank`, one row per ranked value.
pub fn ranking_csv(entries: &[RankedSetting]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["value", "lower", "upper", "initial_rank", "final_rank"])
        .expect("in-memory write");
    for e in entries {
        w.write_record([
            e.label.as_str(),
            &e.interval.lower().to_string(),
            &e.interval.upper().to_string(),
            &e.initial_rank.to_string(),
            &e.final_rank.to_string(),
        ])
        .expect("in-memory write");
    }
    crate::io::into_string(w)
}
