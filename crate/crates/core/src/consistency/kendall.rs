//! Kendall's W and τ-b over the columns (contexts) of a rank profile.
//!
//! Fractional ranks enter unchanged. W is computed as
//! `S / (k · Σ_j SS_j)`, where `S` is the sum of squared deviations of the
//! per-value rank sums, `k` the number of contexts and `SS_j` the sum of
//! squared deviations within context `j`. For tie-averaged ranks `SS_j`
//! equals `(n³ − n − Σ(t³ − t)) / 12`, so this is the usual tie-corrected
//! coefficient; for arbitrary fractional ranks it stays within `[0, 1]`.

use alloc::vec::Vec;

use super::{ConsistencyError, RankProfile};

fn mean(xs: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = xs.clone().count() as f64;
    xs.sum::<f64>() / n
}

/// Tie-corrected coefficient of concordance; `None` when every context ranks
/// all values equal.
pub fn kendall_w(profile: &RankProfile) -> Result<Option<f64>, ConsistencyError> {
    let k = profile.contexts().len();
    let n = profile.values().len();
    if k < 2 {
        return Err(ConsistencyError::TooFewContexts { needed: 2, got: k });
    }
    if n < 2 {
        return Err(ConsistencyError::TooFewValues { needed: 2, got: n });
    }
    let sums: Vec<f64> = profile.rows().iter().map(|row| row.iter().sum()).collect();
    let sums_mean = mean(sums.iter().copied());
    let s: f64 = sums.iter().map(|r| (r - sums_mean) * (r - sums_mean)).sum();
    let within: f64 = (0..k)
        .map(|j| {
            let col = profile.rows().iter().map(move |row| row[j]);
            let m = mean(col.clone());
            col.map(|x| (x - m) * (x - m)).sum::<f64>()
        })
        .sum();
    if within == 0.0 {
        return Ok(None);
    }
    Ok(Some((s / (k as f64 * within)).clamp(0.0, 1.0)))
}

fn sign(x: f64) -> i64 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}

/// Number of pairs tied within `xs`, from the sizes of its tie groups.
fn tied_pairs(xs: &[f64]) -> u64 {
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted
        .chunk_by(|a, b| a == b)
        .map(|g| (g.len() as u64) * (g.len() as u64 - 1) / 2)
        .sum()
}

/// τ-b between two rankings of the same values; `None` if either ranking has
/// no untied pair.
pub fn tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    debug_assert_eq!(x.len(), y.len());
    let n = x.len() as u64;
    let pairs = n * n.saturating_sub(1) / 2;
    let (tx, ty) = (tied_pairs(x), tied_pairs(y));
    if tx == pairs || ty == pairs {
        return None;
    }
    let mut score = 0i64;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            score += sign(x[i] - x[j]) * sign(y[i] - y[j]);
        }
    }
    let denom = libm::sqrt((pairs - tx) as f64 * (pairs - ty) as f64);
    Some(score as f64 / denom)
}

/// Pairwise τ-b between every pair of contexts. Entries are `None` where a
/// context ranks every value equal.
pub fn kendall_tau_matrix(
    profile: &RankProfile,
) -> Result<Vec<Vec<Option<f64>>>, ConsistencyError> {
    let k = profile.contexts().len();
    if k < 2 {
        return Err(ConsistencyError::TooFewContexts { needed: 2, got: k });
    }
    let columns: Vec<Vec<f64>> = (0..k).map(|j| profile.column(j)).collect();
    Ok((0..k)
        .map(|a| (0..k).map(|b| tau_b(&columns[a], &columns[b])).collect())
        .collect())
}

/// Mean of the defined off-diagonal τ-b entries.
pub fn mean_pairwise_tau(matrix: &[Vec<Option<f64>>]) -> Option<f64> {
    let defined: Vec<f64> = (0..matrix.len())
        .flat_map(|a| (a + 1..matrix.len()).filter_map(move |b| matrix[a][b]))
        .collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}
