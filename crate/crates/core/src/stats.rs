//! Score normalization and interval estimation.
//!
//! Two interval sources feed the ranking step: [`mean_and_spread`] (μ ± σ over
//! seeds) and the interquartile mean with a stratified bootstrap percentile
//! interval ([`stratified_bootstrap_ci`]). Both are reachable through
//! [`IntervalSource`], which implements [`IntervalEstimator`].

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Smallest number of bootstrap replicates accepted.
pub const MIN_RESAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("empty sample")]
    Empty,
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("non-finite value {0}")]
    NonFinite(f64),
    #[error("invalid interval [{lower}, {upper}]")]
    InvalidInterval { lower: f64, upper: f64 },
    #[error("human and random baselines coincide ({0})")]
    ZeroDenominator(f64),
    #[error("score matrix row {0} is empty")]
    EmptyRow(usize),
    #[error("score matrix has no rows")]
    NoRows,
    #[error("at least {min} bootstrap resamples are required, got {got}")]
    TooFewResamples { min: usize, got: usize },
    #[error("confidence must lie strictly between 0 and 1, got {0}")]
    InvalidConfidence(f64),
}

/// A closed interval `[lower, upper]` with finite bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    lower: f64,
    upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Result<Self, StatsError> {
        if !lower.is_finite() || !upper.is_finite() || lower > upper {
            return Err(StatsError::InvalidInterval { lower, upper });
        }
        Ok(Self { lower, upper })
    }

    /// Zero-width interval at `x`.
    pub fn point(x: f64) -> Result<Self, StatsError> {
        Self::new(x, x)
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    /// Closed overlap: touching endpoints count, as does containment.
    pub fn overlaps(&self, other: &Interval) -> bool {
        self.lower <= other.upper && other.lower <= self.upper
    }
}

/// A point statistic together with its interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub point: f64,
    pub interval: Interval,
}

/// `(score - random) / (human - random)`.
pub fn human_normalize(score: f64, random_score: f64, human_score: f64) -> Result<f64, StatsError> {
    for v in [score, random_score, human_score] {
        if !v.is_finite() {
            return Err(StatsError::NonFinite(v));
        }
    }
    let denom = human_score - random_score;
    if denom == 0.0 {
        return Err(StatsError::ZeroDenominator(human_score));
    }
    Ok((score - random_score) / denom)
}

fn check_finite(samples: &[f64]) -> Result<(), StatsError> {
    match samples.iter().find(|v| !v.is_finite()) {
        Some(v) => Err(StatsError::NonFinite(*v)),
        None => Ok(()),
    }
}

// Mean accumulated as offsets from the first element, so constant inputs come
// back bit-exact.
fn shifted_mean(xs: &[f64]) -> f64 {
    let shift = xs[0];
    let total = xs.iter().fold(0.0, |acc, x| acc + (x - shift));
    shift + total / xs.len() as f64
}

fn sort_floats(xs: &mut [f64]) {
    xs.sort_unstable_by(f64::total_cmp);
}

/// IQM of `samples`, sorting them in place. Caller guarantees non-empty, finite input.
fn iqm_in_place(samples: &mut [f64]) -> f64 {
    sort_floats(samples);
    let n = samples.len();
    let trim = n / 4;
    shifted_mean(&samples[trim..n - trim])
}

/// Interquartile mean: drop the lowest and highest `floor(n/4)` values and
/// average the rest. For `n < 4` nothing is dropped.
pub fn iqm(samples: &[f64]) -> Result<f64, StatsError> {
    if samples.is_empty() {
        return Err(StatsError::Empty);
    }
    check_finite(samples)?;
    let mut buf = samples.to_vec();
    Ok(iqm_in_place(&mut buf))
}

/// Sample mean and standard deviation (n − 1 denominator).
pub fn mean_sd(samples: &[f64]) -> Result<(f64, f64), StatsError> {
    if samples.len() < 2 {
        return Err(StatsError::TooFewSamples {
            needed: 2,
            got: samples.len(),
        });
    }
    check_finite(samples)?;
    let mean = shifted_mean(samples);
    let ss = samples
        .iter()
        .fold(0.0, |acc, x| acc + (x - mean) * (x - mean));
    Ok((mean, libm::sqrt(ss / (samples.len() - 1) as f64)))
}

/// `[μ − σ, μ + σ]` over the samples.
pub fn mean_and_spread(samples: &[f64]) -> Result<Interval, StatsError> {
    let (mean, sd) = mean_sd(samples)?;
    Interval::new(mean - sd, mean + sd)
}

/// Human-normalized scores grouped by stratum (environment), one row per
/// stratum, one column per seed. Rows may have different lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    rows: Vec<Vec<f64>>,
}

impl ScoreMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self, StatsError> {
        if rows.is_empty() {
            return Err(StatsError::NoRows);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.is_empty() {
                return Err(StatsError::EmptyRow(i));
            }
            check_finite(row)?;
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Number of entries over all rows.
    pub fn len(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All entries, row by row.
    pub fn pooled(&self) -> Vec<f64> {
        self.rows.iter().flatten().copied().collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub resamples: usize,
    pub confidence: f64,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            resamples: 2000,
            confidence: 0.95,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<(), StatsError> {
        if self.resamples < MIN_RESAMPLES {
            return Err(StatsError::TooFewResamples {
                min: MIN_RESAMPLES,
                got: self.resamples,
            });
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(StatsError::InvalidConfidence(self.confidence));
        }
        Ok(())
    }
}

/// Generator for one bootstrap replicate.
///
/// Replicate `index` always draws from ChaCha8 stream `index` of the key
/// derived from `seed`, so replicates can be evaluated in any order or on any
/// number of threads and still produce the same values.
pub fn replicate_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// IQM of one stratified resample of `matrix`.
///
/// Each row is resampled with replacement to its own length, rows in order;
/// the pooled draws are then reduced with the IQM. `scratch` is reused
/// between calls to avoid reallocating.
pub fn bootstrap_replicate(
    matrix: &ScoreMatrix,
    seed: u64,
    index: u64,
    scratch: &mut Vec<f64>,
) -> f64 {
    let mut rng = replicate_rng(seed, index);
    scratch.clear();
    for row in &matrix.rows {
        for _ in 0..row.len() {
            scratch.push(row[rng.random_range(0..row.len())]);
        }
    }
    iqm_in_place(scratch)
}

/// Linear-interpolation quantile of sorted data, `q` in `[0, 1]`.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    if frac == 0.0 || lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[hi] - sorted[lo])
    }
}

/// Equal-tailed percentile interval of replicate statistics. Sorts in place.
pub fn percentile_interval(
    replicates: &mut [f64],
    confidence: f64,
) -> Result<Interval, StatsError> {
    if replicates.is_empty() {
        return Err(StatsError::Empty);
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(StatsError::InvalidConfidence(confidence));
    }
    check_finite(replicates)?;
    sort_floats(replicates);
    let alpha = (1.0 - confidence) / 2.0;
    Interval::new(
        sorted_quantile(replicates, alpha),
        sorted_quantile(replicates, 1.0 - alpha),
    )
}

/// Stratified bootstrap percentile interval for the IQM of `matrix`.
pub fn stratified_bootstrap_ci(
    matrix: &ScoreMatrix,
    config: &BootstrapConfig,
) -> Result<Interval, StatsError> {
    config.validate()?;
    let mut scratch = Vec::with_capacity(matrix.len());
    let mut reps: Vec<f64> = (0..config.resamples as u64)
        .map(|i| bootstrap_replicate(matrix, config.seed, i, &mut scratch))
        .collect();
    percentile_interval(&mut reps, config.confidence)
}

/// How per-seed scores become an interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum IntervalSource {
    /// Mean ± sample standard deviation of the pooled scores.
    MeanSpread,
    /// IQM with a stratified bootstrap percentile interval.
    IqmBootstrap(BootstrapConfig),
}

impl Default for IntervalSource {
    fn default() -> Self {
        IntervalSource::IqmBootstrap(BootstrapConfig::default())
    }
}

pub trait IntervalEstimator {
    fn source(&self) -> IntervalSource;
    fn estimate(&self, matrix: &ScoreMatrix) -> Result<Estimate, StatsError>;
}

impl IntervalEstimator for IntervalSource {
    fn source(&self) -> IntervalSource {
        *self
    }

    fn estimate(&self, matrix: &ScoreMatrix) -> Result<Estimate, StatsError> {
        let pooled = matrix.pooled();
        match self {
            IntervalSource::MeanSpread => {
                let (mean, sd) = mean_sd(&pooled)?;
                Ok(Estimate {
                    point: mean,
                    interval: Interval::new(mean - sd, mean + sd)?,
                })
            }
            IntervalSource::IqmBootstrap(cfg) => Ok(Estimate {
                point: iqm(&pooled)?,
                interval: stratified_bootstrap_ci(matrix, cfg)?,
            }),
        }
    }
}
