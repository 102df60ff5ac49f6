//! Synthetic sweeps with planted rankings.
//!
//! A [`PlantedDesign`] fixes the true mean score of every (hyper-parameter
//! value, agent, environment, data regime) cell as
//! `base[v] + agent[a][v] + environment[e][v] + data_regime[r][v]`; runs add
//! Gaussian noise of one design-wide scale.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consistency::{
    assemble_profiles, kendall_w, thc, AssemblyOptions, ConsistencyError, PtpNormalization, Setup,
};
use crate::data::{Baseline, BaselineTable, DataError, RunRecord, Schema, SweepDataset};
use crate::stats::IntervalEstimator;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("invalid design: {0}")]
    InvalidDesign(String),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Consistency(#[from] ConsistencyError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedHyperparameter {
    pub name: String,
    pub values: Vec<String>,
    /// Mean per value; empty means all zero.
    #[serde(default)]
    pub base: Vec<f64>,
    /// Per-agent offsets, one per value.
    #[serde(default)]
    pub agent: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub environment: BTreeMap<String, Vec<f64>>,
    #[serde(default)]
    pub data_regime: BTreeMap<String, Vec<f64>>,
}

impl PlantedHyperparameter {
    fn offset(table: &BTreeMap<String, Vec<f64>>, label: &str, v: usize) -> f64 {
        table.get(label).map_or(0.0, |o| o[v])
    }

    /// True mean of value index `v` in one cell.
    pub fn mean(&self, v: usize, agent: &str, environment: &str, data_regime: &str) -> f64 {
        self.base.get(v).copied().unwrap_or(0.0)
            + Self::offset(&self.agent, agent, v)
            + Self::offset(&self.environment, environment, v)
            + Self::offset(&self.data_regime, data_regime, v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedDesign {
    /// Generator seed.
    pub seed: u64,
    /// Standard deviation of the Gaussian noise added to every run.
    pub noise: f64,
    pub seeds_per_cell: u32,
    pub agents: Vec<String>,
    pub environments: Vec<String>,
    pub data_regimes: Vec<String>,
    pub hyperparameters: Vec<PlantedHyperparameter>,
}

fn unique(kind: &str, items: &[String]) -> Result<(), SynthError> {
    if items.is_empty() {
        return Err(SynthError::InvalidDesign(format!("no {kind} declared")));
    }
    let mut seen = BTreeSet::new();
    match items.iter().find(|s| !seen.insert(s.as_str())) {
        Some(dup) => Err(SynthError::InvalidDesign(format!(
            "{kind} {dup:?} declared twice"
        ))),
        None => Ok(()),
    }
}

impl PlantedDesign {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |msg: String| Err(SynthError::InvalidDesign(msg));
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad(format!(
                "noise must be finite and non-negative, got {}",
                self.noise
            ));
        }
        if self.seeds_per_cell == 0 {
            return bad("seeds_per_cell must be positive".into());
        }
        unique("agent", &self.agents)?;
        unique("environment", &self.environments)?;
        unique("data regime", &self.data_regimes)?;
        let names: Vec<String> = self
            .hyperparameters
            .iter()
            .map(|h| h.name.clone())
            .collect();
        unique("hyper-parameter", &names)?;
        for hp in &self.hyperparameters {
            unique("value", &hp.values)?;
            let m = hp.values.len();
            if !hp.base.is_empty() && hp.base.len() != m {
                return bad(format!(
                    "{}: base has {} entries for {m} values",
                    hp.name,
                    hp.base.len()
                ));
            }
            let tables = [
                (&hp.agent, &self.agents),
                (&hp.environment, &self.environments),
                (&hp.data_regime, &self.data_regimes),
            ];
            for (table, labels) in tables {
                for (label, offsets) in table {
                    if !labels.contains(label) {
                        return bad(format!(
                            "{}: offsets for undeclared label {label:?}",
                            hp.name
                        ));
                    }
                    if offsets.len() != m {
                        return bad(format!(
                            "{}: {label:?} has {} offsets for {m} values",
                            hp.name,
                            offsets.len()
                        ));
                    }
                }
            }
            let all_finite = hp
                .base
                .iter()
                .chain(tables.iter().flat_map(|(t, _)| t.values().flatten()))
                .all(|x| x.is_finite());
            if !all_finite {
                return bad(format!("{}: means must be finite", hp.name));
            }
        }
        Ok(())
    }

    pub fn schema(&self) -> Schema {
        Schema {
            agents: self.agents.clone(),
            environments: self.environments.clone(),
            data_regimes: self.data_regimes.clone(),
            hyperparameters: self
                .hyperparameters
                .iter()
                .map(|h| (h.name.clone(), h.values.clone()))
                .collect(),
        }
    }

    /// `random = 0, human = 1` for every environment, so normalization is the identity.
    pub fn baselines(&self) -> BaselineTable {
        BaselineTable::new(self.environments.iter().map(|e| {
            (
                e.clone(),
                Baseline {
                    random_score: 0.0,
                    human_score: 1.0,
                },
            )
        }))
        .expect("environments are unique")
    }
}

/// Draws one run per (cell, seed index).
///
/// Cells are numbered in declaration order (hyper-parameter, value, agent,
/// environment, data regime); cell `c` uses ChaCha8 stream `c` of the design
/// seed and its `k`-th normal draw belongs to seed `k`.
pub fn generate(design: &PlantedDesign) -> Result<SweepDataset, SynthError> {
    design.validate()?;
    let mut records = Vec::new();
    let mut cell = 0u64;
    for hp in &design.hyperparameters {
        for (v, value) in hp.values.iter().enumerate() {
            for agent in &design.agents {
                for env in &design.environments {
                    for regime in &design.data_regimes {
                        let mean = hp.mean(v, agent, env, regime);
                        let mut rng = ChaCha8Rng::seed_from_u64(design.seed);
                        rng.set_stream(cell);
                        for seed in 0..u64::from(design.seeds_per_cell) {
                            let z: f64 = rng.sample(StandardNormal);
                            let final_score = mean + design.noise * z;
                            records.push(RunRecord {
                                agent: agent.clone(),
                                environment: env.clone(),
                                data_regime: regime.clone(),
                                hyperparameter: hp.name.clone(),
                                value: value.clone(),
                                seed,
                                final_score,
                            });
                        }
                        cell += 1;
                    }
                }
            }
        }
    }
    Ok(SweepDataset::new(
        records,
        design.baselines(),
        design.schema(),
    )?)
}

/// A family of designs differing only in noise level, each repeated `trials` times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyPlan {
    pub setup: Setup,
    pub noise_levels: Vec<f64>,
    pub trials: usize,
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub noise: f64,
    pub hyperparameter: String,
    /// Number of (trial, profile) observations.
    pub observations: usize,
    pub thc_mean: f64,
    pub thc_sd: f64,
    pub w_mean: Option<f64>,
    pub w_sd: Option<f64>,
    pub w_undefined: usize,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// `(hyper-parameter, THC, W)` for each profile of one trial.
pub type TrialScores = Vec<(String, f64, Option<f64>)>;

/// Generator seed of one trial, a pure function of its coordinates.
pub fn trial_seed(master_seed: u64, level: usize, trial: usize) -> u64 {
    splitmix64(master_seed ^ splitmix64(((level as u64) << 32) ^ trial as u64))
}

/// Mean and sample standard deviation; constant input gives an exact mean and zero spread.
fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let shift = xs[0];
    let mean = shift + xs.iter().map(|x| x - shift).sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, libm::sqrt(ss / (n - 1.0)))
}

/// THC and Kendall's W of every profile of one generated trial.
pub fn score_trial<E: IntervalEstimator + ?Sized>(
    design: &PlantedDesign,
    setup: Setup,
    estimator: &E,
    options: &AssemblyOptions,
    normalization: PtpNormalization,
) -> Result<TrialScores, SynthError> {
    let dataset = generate(design)?;
    let assembly = assemble_profiles(&dataset, setup, estimator, options)?;
    Ok(assembly
        .profiles
        .iter()
        .map(|p| {
            let w = kendall_w(&p.profile).ok().flatten();
            (
                p.profile.hyperparameter().into(),
                thc(&p.profile, normalization),
                w,
            )
        })
        .collect())
}

/// Monte-Carlo summary of THC and W per noise level and hyper-parameter.
pub fn recovery_study<E: IntervalEstimator + ?Sized>(
    design: &PlantedDesign,
    plan: &StudyPlan,
    estimator: &E,
    options: &AssemblyOptions,
    normalization: PtpNormalization,
) -> Result<Vec<StudyRow>, SynthError> {
    if plan.trials == 0 {
        return Err(SynthError::InvalidDesign("trials must be positive".into()));
    }
    let mut trials = Vec::with_capacity(plan.noise_levels.len() * plan.trials);
    for (level, &noise) in plan.noise_levels.iter().enumerate() {
        for trial in 0..plan.trials {
            let d = PlantedDesign {
                noise,
                seed: trial_seed(plan.master_seed, level, trial),
                ..design.clone()
            };
            trials.push((
                level,
                score_trial(&d, plan.setup, estimator, options, normalization)?,
            ));
        }
    }
    Ok(summarize(&plan.noise_levels, trials))
}

/// Folds per-trial scores, tagged with their noise-level index, into study rows.
pub fn summarize(noise_levels: &[f64], trials: Vec<(usize, TrialScores)>) -> Vec<StudyRow> {
    // (thc values, defined W values, undefined W count)
    type Acc = (Vec<f64>, Vec<f64>, usize);
    let mut acc: BTreeMap<(usize, String), Acc> = BTreeMap::new();
    for (level, scores) in trials {
        for (hp, t, w) in scores {
            let entry = acc.entry((level, hp)).or_default();
            entry.0.push(t);
            match w {
                Some(w) => entry.1.push(w),
                None => entry.2 += 1,
            }
        }
    }
    acc.into_iter()
        .map(|((level, hyperparameter), (thcs, ws, w_undefined))| {
            let (thc_mean, thc_sd) = mean_sd(&thcs);
            let (w_mean, w_sd) = if ws.is_empty() {
                (None, None)
            } else {
                let (m, s) = mean_sd(&ws);
                (Some(m), Some(s))
            };
            StudyRow {
                noise: noise_levels[level],
                hyperparameter,
                observations: thcs.len(),
                thc_mean,
                thc_sd,
                w_mean,
                w_sd,
                w_undefined,
            }
        })
        .collect()
}
