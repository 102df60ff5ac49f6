//! Fractional ranking of interval estimates.
//!
//! Settings are ordered by decreasing upper bound (then decreasing lower
//! bound, then label), which fixes the initial rank `r'` (1 is best). A
//! setting's final rank averages the extreme positions whose intervals it
//! overlaps:
//!
//! * `l` = first position whose lower bound is `<=` this setting's upper bound
//! * `u` = last position whose upper bound is `>=` this setting's lower bound
//! * rank = `(l + u) / 2`
//!
//! [`RankingMode::OverlapSet`] instead averages the initial ranks of every
//! overlapping setting. The two agree whenever the overlapping positions form
//! a contiguous block; they can differ when a wide interval straddles a
//! narrow one it does not touch.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::Interval;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RankingError {
    #[error("nothing to rank")]
    Empty,
    #[error("duplicate setting label {0:?}")]
    DuplicateLabel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankingMode {
    /// Midpoint of the span of overlapping positions, `(l + u) / 2`.
    #[default]
    Span,
    /// Mean initial rank over all overlapping settings.
    OverlapSet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankedSetting {
    pub label: String,
    pub interval: Interval,
    /// Position after sorting, 1-based.
    pub initial_rank: usize,
    /// First and last overlapping positions, 1-based.
    pub span: (usize, usize),
    pub final_rank: f64,
}

/// Ranks of one hyper-parameter's values within one context.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankingTable {
    pub context: String,
    pub hyperparameter: String,
    /// In initial-rank order.
    pub entries: Vec<RankedSetting>,
}

impl RankingTable {
    pub fn rank_of(&self, label: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.label == label)
            .map(|e| e.final_rank)
    }
}

fn sort_order(a: (&str, &Interval), b: (&str, &Interval)) -> Ordering {
    b.1.upper()
        .total_cmp(&a.1.upper())
        .then_with(|| b.1.lower().total_cmp(&a.1.lower()))
        .then_with(|| a.0.cmp(b.0))
}

/// Ranks labelled intervals; the result is in initial-rank order.
pub fn compute_rankings<L: AsRef<str>>(
    settings: &[(L, Interval)],
    mode: RankingMode,
) -> Result<Vec<RankedSetting>, RankingError> {
    if settings.is_empty() {
        return Err(RankingError::Empty);
    }
    let mut order: Vec<(&str, &Interval)> =
        settings.iter().map(|(l, iv)| (l.as_ref(), iv)).collect();
    order.sort_by(|a, b| sort_order(*a, *b));
    if let Some(w) = order.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(RankingError::DuplicateLabel(w[0].0.into()));
    }
    // Linear scans rather than binary search: once sorted by upper bound the
    // lower bounds are not monotone, so neither search key is sorted in general.
    let ranked = order
        .iter()
        .enumerate()
        .map(|(pos, (label, iv))| {
            let first = order
                .iter()
                .position(|(_, other)| other.lower() <= iv.upper())
                .unwrap_or(pos);
            let last = order
                .iter()
                .rposition(|(_, other)| other.upper() >= iv.lower())
                .unwrap_or(pos);
            let final_rank = match mode {
                RankingMode::Span => (first + last + 2) as f64 / 2.0,
                RankingMode::OverlapSet => {
                    let (sum, n) = order
                        .iter()
                        .enumerate()
                        .filter(|(_, (_, other))| other.overlaps(iv))
                        .fold((0usize, 0usize), |(s, n), (p, _)| (s + p + 1, n + 1));
                    sum as f64 / n as f64
                }
            };
            RankedSetting {
                label: String::from(*label),
                interval: **iv,
                initial_rank: pos + 1,
                span: (first + 1, last + 1),
                final_rank,
            }
        })
        .collect();
    Ok(ranked)
}

/// Whether the settings overlapping each entry occupy a contiguous block of
/// positions, i.e. whether both modes must agree.
pub fn overlaps_are_contiguous(ranked: &[RankedSetting]) -> bool {
    ranked.iter().all(|r| {
        let (first, last) = r.span;
        ranked[first - 1..last]
            .iter()
            .all(|o| o.interval.overlaps(&r.interval))
    })
}
