//! Cross-context consistency of hyper-parameter rankings.
//!
//! For every value of a hyper-parameter the peak-to-peak spread of its rank
//! across contexts is normalized and averaged into the THC score: 0 when every
//! context ranks the values identically, up to 1 when every value swings
//! between best and worst.

mod assemble;
mod kendall;

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Axis, ContextKey, DataError};
use crate::ranking::RankingError;
use crate::stats::StatsError;

pub use assemble::{
    assemble_profiles, AssembledProfile, Assembly, AssemblyOptions, Skipped, ValueEstimate, Warning,
};
pub use kendall::{kendall_tau_matrix, kendall_w, mean_pairwise_tau, tau_b};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConsistencyError {
    #[error("empty rank list")]
    EmptyRanks,
    #[error("profile has no values or no contexts")]
    EmptyProfile,
    #[error("profile has {got} rank rows for {expected} values")]
    RowCount { got: usize, expected: usize },
    #[error("profile row {row} has {got} ranks, expected {expected}")]
    RaggedProfile {
        row: usize,
        got: usize,
        expected: usize,
    },
    #[error("non-finite rank {0}")]
    NonFiniteRank(f64),
    #[error("need at least {needed} contexts, got {got}")]
    TooFewContexts { needed: usize, got: usize },
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("{scope}: {source}")]
    Data { scope: String, source: DataError },
    #[error("{scope}: {source}")]
    Stats { scope: String, source: StatsError },
    #[error("{scope}: {source}")]
    Ranking { scope: String, source: RankingError },
}

/// Which coordinate varies between the contexts being compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Setup {
    AcrossAgents,
    AcrossEnvironments,
    AcrossDataRegimes,
}

impl Setup {
    pub const ALL: [Setup; 3] = [
        Setup::AcrossAgents,
        Setup::AcrossEnvironments,
        Setup::AcrossDataRegimes,
    ];

    pub fn varying(self) -> Axis {
        match self {
            Setup::AcrossAgents => Axis::Agent,
            Setup::AcrossEnvironments => Axis::Environment,
            Setup::AcrossDataRegimes => Axis::DataRegime,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Setup::AcrossAgents => "across-agents",
            Setup::AcrossEnvironments => "across-environments",
            Setup::AcrossDataRegimes => "across-data-regimes",
        }
    }
}

impl fmt::Display for Setup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How peak-to-peak spreads are scaled before averaging.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PtpNormalization {
    /// Divide by the largest attainable spread, `m − 1`.
    #[default]
    MaxSpread,
    /// Divide by the sum of spreads over all values. THC then collapses to
    /// `1/m` whenever any value moves; kept for comparison.
    SumOfSpreads,
}

/// Final ranks of one hyper-parameter's values (rows) across contexts (columns).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankProfile {
    hyperparameter: String,
    values: Vec<String>,
    contexts: Vec<String>,
    ranks: Vec<Vec<f64>>,
}

impl RankProfile {
    pub fn new(
        hyperparameter: String,
        values: Vec<String>,
        contexts: Vec<String>,
        ranks: Vec<Vec<f64>>,
    ) -> Result<Self, ConsistencyError> {
        if values.is_empty() || contexts.is_empty() {
            return Err(ConsistencyError::EmptyProfile);
        }
        if ranks.len() != values.len() {
            return Err(ConsistencyError::RowCount {
                got: ranks.len(),
                expected: values.len(),
            });
        }
        for (row, r) in ranks.iter().enumerate() {
            if r.len() != contexts.len() {
                return Err(ConsistencyError::RaggedProfile {
                    row,
                    got: r.len(),
                    expected: contexts.len(),
                });
            }
            if let Some(x) = r.iter().find(|x| !x.is_finite()) {
                return Err(ConsistencyError::NonFiniteRank(*x));
            }
        }
        Ok(Self {
            hyperparameter,
            values,
            contexts,
            ranks,
        })
    }

    pub fn hyperparameter(&self) -> &str {
        &self.hyperparameter
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    pub fn contexts(&self) -> &[String] {
        &self.contexts
    }

    /// One row of ranks per value.
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.ranks
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.ranks.iter().map(|row| row[j]).collect()
    }

    /// Unnormalized peak-to-peak spread of every value.
    pub fn ptps(&self) -> Vec<f64> {
        self.ranks
            .iter()
            .map(|r| ptp(r).expect("rows are non-empty"))
            .collect()
    }
}

/// `max − min` of a value's ranks across contexts.
pub fn ptp(ranks: &[f64]) -> Result<f64, ConsistencyError> {
    let (first, rest) = ranks.split_first().ok_or(ConsistencyError::EmptyRanks)?;
    let (lo, hi) = rest
        .iter()
        .fold((*first, *first), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    Ok(hi - lo)
}

/// Scales spreads of `m` values.
pub fn normalized_ptp(ptp_values: &[f64], m: usize, mode: PtpNormalization) -> Vec<f64> {
    let zeros = || alloc::vec![0.0; ptp_values.len()];
    match mode {
        PtpNormalization::MaxSpread if m <= 1 => zeros(),
        PtpNormalization::MaxSpread => {
            let scale = (m - 1) as f64;
            ptp_values.iter().map(|p| p / scale).collect()
        }
        PtpNormalization::SumOfSpreads => {
            let total: f64 = ptp_values.iter().sum();
            if total == 0.0 {
                zeros()
            } else {
                ptp_values.iter().map(|p| p / total).collect()
            }
        }
    }
}

/// Mean normalized spread over the profile's values.
pub fn thc(profile: &RankProfile, mode: PtpNormalization) -> f64 {
    let m = profile.values.len();
    let normalized = normalized_ptp(&profile.ptps(), m, mode);
    normalized.iter().sum::<f64>() / m as f64
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct KendallSummary {
    /// `None` when undefined (every context ranks all values equal, or fewer than two values).
    pub w: Option<f64>,
    pub mean_tau: Option<f64>,
}

impl KendallSummary {
    pub fn of(profile: &RankProfile) -> Self {
        let w = kendall_w(profile).ok().flatten();
        let mean_tau = kendall_tau_matrix(profile)
            .ok()
            .and_then(|t| mean_pairwise_tau(&t));
        Self { w, mean_tau }
    }
}

/// THC and related scores for one profile.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileScore {
    pub fixed: ContextKey,
    pub hyperparameter: String,
    pub contexts: Vec<String>,
    pub values: Vec<String>,
    pub thc: f64,
    pub normalized_ptp: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kendall: Option<KendallSummary>,
}

impl ProfileScore {
    pub fn new(
        fixed: ContextKey,
        profile: &RankProfile,
        mode: PtpNormalization,
        with_kendall: bool,
    ) -> Self {
        let normalized_ptp = normalized_ptp(&profile.ptps(), profile.values.len(), mode);
        Self {
            fixed,
            hyperparameter: profile.hyperparameter.clone(),
            contexts: profile.contexts.clone(),
            values: profile.values.clone(),
            thc: thc(profile, mode),
            normalized_ptp,
            kendall: with_kendall.then(|| KendallSummary::of(profile)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub setup: Setup,
    pub normalization: PtpNormalization,
    pub scores: Vec<ProfileScore>,
    pub skipped: Vec<Skipped>,
}

impl ConsistencyReport {
    pub fn from_assembly(assembly: &Assembly, mode: PtpNormalization, with_kendall: bool) -> Self {
        Self {
            setup: assembly.setup,
            normalization: mode,
            scores: assembly
                .profiles
                .iter()
                .map(|p| ProfileScore::new(p.fixed.clone(), &p.profile, mode, with_kendall))
                .collect(),
            skipped: assembly.skipped.clone(),
        }
    }
}
