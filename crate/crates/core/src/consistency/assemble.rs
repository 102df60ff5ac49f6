//! Dataset → rank profiles for one transfer setup.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{ConsistencyError, RankProfile, Setup};
use crate::data::{slice, Axis, ContextKey, DataError, Selector, SweepDataset};
use crate::ranking::{compute_rankings, RankingMode, RankingTable};
use crate::stats::{Estimate, IntervalEstimator};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssemblyOptions {
    pub ranking: RankingMode,
    /// When the environment is not the varying axis, pool all environments
    /// into one context (stratified by environment) instead of analysing each
    /// environment separately.
    pub pool_environments: bool,
    /// Groups with fewer seeds are left out of ranking.
    pub min_seeds: usize,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            ranking: RankingMode::Span,
            pool_environments: true,
            min_seeds: 2,
        }
    }
}

/// Aggregate of one (context, value) group.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueEstimate {
    pub context: String,
    pub value: String,
    pub seeds: usize,
    pub estimate: Option<Estimate>,
    /// Whether the value made it into the profile.
    pub included: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssembledProfile {
    pub fixed: ContextKey,
    pub profile: RankProfile,
    /// One table per context, in profile column order.
    pub tables: Vec<RankingTable>,
    pub estimates: Vec<ValueEstimate>,
}

/// A hyper-parameter that could not be profiled under some fixed coordinates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Skipped {
    pub fixed: ContextKey,
    pub hyperparameter: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Warning {
    pub fixed: ContextKey,
    pub hyperparameter: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Assembly {
    pub setup: Setup,
    pub profiles: Vec<AssembledProfile>,
    pub skipped: Vec<Skipped>,
    pub warnings: Vec<Warning>,
}

/// Every combination of fixed coordinates present in the data, in schema order.
fn fixed_contexts(
    dataset: &SweepDataset,
    setup: Setup,
    pool_environments: bool,
) -> Vec<ContextKey> {
    let varying = setup.varying();
    let fixed_axes: Vec<Axis> = Axis::ALL.into_iter().filter(|a| *a != varying).collect();
    let choices = |axis: Axis| -> Vec<Selector> {
        if axis == Axis::Environment && pool_environments {
            alloc::vec![Selector::All]
        } else {
            dataset
                .present(axis)
                .into_iter()
                .map(|id| Selector::Fixed(id.to_string()))
                .collect()
        }
    };
    let mut keys = Vec::new();
    for a in choices(fixed_axes[0]) {
        for b in choices(fixed_axes[1]) {
            let key = ContextKey::new(varying, [(fixed_axes[0], a.clone()), (fixed_axes[1], b)])
                .expect("two distinct non-varying axes");
            keys.push(key);
        }
    }
    keys
}

/// Builds one rank profile per (fixed coordinates, hyper-parameter) for `setup`.
///
/// Per context, each value's seeds are human-normalized and aggregated by
/// `estimator`; only values with at least `min_seeds` runs in every context
/// are ranked. Hyper-parameters with fewer than two contexts, or without any
/// value shared by all contexts, are reported in [`Assembly::skipped`].
pub fn assemble_profiles<E: IntervalEstimator + ?Sized>(
    dataset: &SweepDataset,
    setup: Setup,
    estimator: &E,
    options: &AssemblyOptions,
) -> Result<Assembly, ConsistencyError> {
    let mut assembly = Assembly {
        setup,
        profiles: Vec::new(),
        skipped: Vec::new(),
        warnings: Vec::new(),
    };
    let hyperparameters: Vec<&str> = dataset.hyperparameters().collect();
    for fixed in fixed_contexts(dataset, setup, options.pool_environments) {
        for &hp in &hyperparameters {
            let skip = |reason: String| Skipped {
                fixed: fixed.clone(),
                hyperparameter: hp.into(),
                reason,
            };
            let sl = match slice(dataset, &fixed, hp) {
                Ok(sl) => sl,
                Err(DataError::EmptySlice(_)) => {
                    assembly.skipped.push(skip("no runs".into()));
                    continue;
                }
                Err(source) => {
                    return Err(ConsistencyError::Data {
                        scope: format!("{hp} in {fixed}"),
                        source,
                    })
                }
            };
            if sl.contexts.len() < 2 {
                assembly.skipped.push(skip(format!(
                    "runs in only {} {} context(s): {}",
                    sl.contexts.len(),
                    setup.varying(),
                    sl.contexts.join(", ")
                )));
                continue;
            }
            let mut warn = |message: String| {
                assembly.warnings.push(Warning {
                    fixed: fixed.clone(),
                    hyperparameter: hp.into(),
                    message,
                })
            };

            let mut estimates = Vec::with_capacity(sl.groups.len());
            for g in &sl.groups {
                let seeds = g.seed_count();
                let estimate = if seeds >= options.min_seeds {
                    let scope = || format!("{hp}={} in {} ({fixed})", g.value, g.context);
                    let matrix = g.normalized(dataset.baselines()).map_err(|source| {
                        ConsistencyError::Data {
                            scope: scope(),
                            source,
                        }
                    })?;
                    let est =
                        estimator
                            .estimate(&matrix)
                            .map_err(|source| ConsistencyError::Stats {
                                scope: scope(),
                                source,
                            })?;
                    Some(est)
                } else {
                    None
                };
                estimates.push(ValueEstimate {
                    context: g.context.clone(),
                    value: g.value.clone(),
                    seeds,
                    estimate,
                    included: false,
                });
            }

            let run_anywhere: BTreeSet<&str> = estimates
                .iter()
                .filter(|e| e.seeds > 0)
                .map(|e| e.value.as_str())
                .collect();
            for e in estimates
                .iter()
                .filter(|e| e.estimate.is_none() && run_anywhere.contains(e.value.as_str()))
            {
                warn(format!(
                    "{}={} in {}: {} seed(s), need {}; excluded",
                    hp, e.value, e.context, e.seeds, options.min_seeds
                ));
            }
            let complete: Vec<String> = sl
                .values
                .iter()
                .filter(|v| {
                    estimates
                        .iter()
                        .filter(|e| &e.value == *v)
                        .all(|e| e.estimate.is_some())
                })
                .cloned()
                .collect();
            for v in sl
                .values
                .iter()
                .filter(|v| run_anywhere.contains(v.as_str()) && !complete.contains(v))
            {
                warn(format!(
                    "{hp}={v} is missing from some {} contexts; excluded from profile",
                    setup.varying()
                ));
            }
            if complete.is_empty() {
                assembly.skipped.push(skip(format!(
                    "no value has enough runs in every {} context",
                    setup.varying()
                )));
                continue;
            }
            for e in estimates.iter_mut() {
                e.included = complete.contains(&e.value);
            }

            let mut tables = Vec::with_capacity(sl.contexts.len());
            for ctx in &sl.contexts {
                let settings: Vec<(&str, crate::stats::Interval)> = estimates
                    .iter()
                    .filter(|e| e.included && &e.context == ctx)
                    .map(|e| (e.value.as_str(), e.estimate.expect("included").interval))
                    .collect();
                let entries = compute_rankings(&settings, options.ranking).map_err(|source| {
                    ConsistencyError::Ranking {
                        scope: format!("{hp} in {ctx} ({fixed})"),
                        source,
                    }
                })?;
                tables.push(RankingTable {
                    context: ctx.clone(),
                    hyperparameter: hp.into(),
                    entries,
                });
            }
            let ranks: Vec<Vec<f64>> = complete
                .iter()
                .map(|v| {
                    tables
                        .iter()
                        .map(|t| t.rank_of(v).expect("ranked"))
                        .collect()
                })
                .collect();
            let profile = RankProfile::new(hp.into(), complete, sl.contexts.clone(), ranks)?;
            assembly.profiles.push(AssembledProfile {
                fixed: fixed.clone(),
                profile,
                tables,
                estimates,
            });
        }
    }
    Ok(assembly)
}
