//! Consistency scoring for hyper-parameter sweeps.
//!
//! Per-seed final scores are aggregated into interval estimates (mean ± sd, or
//! the interquartile mean with a stratified bootstrap confidence interval),
//! intervals are turned into fractional ranks that respect overlap, and the
//! variation of those ranks across contexts (agents, environments or data
//! regimes) is summarised as the Tuning Hyperparameter Consistency score.
//! Kendall's W and τ-b are provided as baselines.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, parallel
//! resampling and the command line live in the `thc` crate.
//!
//! ```
//! use thc_core::ranking::{compute_rankings, RankingMode};
//! use thc_core::stats::Interval;
//!
//! let settings = [
//!     ("a", Interval::new(200.0, 300.0).unwrap()),
//!     ("b", Interval::new(250.0, 350.0).unwrap()),
//!     ("c", Interval::new(180.0, 260.0).unwrap()),
//! ];
//! let ranked = compute_rankings(&settings, RankingMode::Span).unwrap();
//! assert!(ranked.iter().all(|r| r.final_rank == 2.0));
//! ```
#![no_std]
#![warn(missing_debug_implementations, rust_2018_idioms)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod consistency;
pub mod data;
pub mod ranking;
pub mod stats;
pub mod synth;

pub use consistency::{
    assemble_profiles, kendall_tau_matrix, kendall_w, normalized_ptp, ptp, thc, Assembly,
    AssemblyOptions, ConsistencyReport, PtpNormalization, RankProfile, Setup,
};
pub use data::{Axis, BaselineTable, ContextKey, RunRecord, Schema, Selector, SweepDataset};
pub use ranking::{compute_rankings, RankedSetting, RankingMode, RankingTable};
pub use stats::{
    human_normalize, iqm, mean_and_spread, stratified_bootstrap_ci, BootstrapConfig, Interval,
    ScoreMatrix,
};
