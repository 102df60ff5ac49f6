//! Thread-pool execution of bootstrap replicates and study trials.
//!
//! Results never depend on the number of threads: replicate `i` always uses
//! its own random stream and results are gathered in index order.

use rayon::prelude::*;
use thc_core::consistency::{AssemblyOptions, PtpNormalization};
use thc_core::stats::{
    bootstrap_replicate, iqm, percentile_interval, Estimate, IntervalEstimator, IntervalSource,
    ScoreMatrix, StatsError,
};
use thc_core::synth::{
    score_trial, summarize, trial_seed, PlantedDesign, StudyPlan, StudyRow, SynthError,
};

/// [`IntervalSource`] whose bootstrap replicates run on the current rayon pool.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParallelEstimator(pub IntervalSource);

impl IntervalEstimator for ParallelEstimator {
    fn source(&self) -> IntervalSource {
        self.0
    }

    fn estimate(&self, matrix: &ScoreMatrix) -> Result<Estimate, StatsError> {
        let cfg = match self.0 {
            IntervalSource::MeanSpread => return self.0.estimate(matrix),
            IntervalSource::IqmBootstrap(cfg) => cfg,
        };
        cfg.validate()?;
        let pooled = matrix.pooled();
        let point = iqm(&pooled)?;
        let mut reps: Vec<f64> = (0..cfg.resamples as u64)
            .into_par_iter()
            .map_init(
                || Vec::with_capacity(pooled.len()),
                |scratch, i| bootstrap_replicate(matrix, cfg.seed, i, scratch),
            )
            .collect();
        Ok(Estimate {
            point,
            interval: percentile_interval(&mut reps, cfg.confidence)?,
        })
    }
}

/// Runs `f` on a dedicated pool of `threads` workers (0 = rayon default).
pub fn with_threads<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
        .install(f)
}

/// Recovery study with trials evaluated in parallel.
pub fn recovery_study(
    design: &PlantedDesign,
    plan: &StudyPlan,
    source: IntervalSource,
    options: &AssemblyOptions,
    normalization: PtpNormalization,
) -> Result<Vec<StudyRow>, SynthError> {
    if plan.trials == 0 {
        return Err(SynthError::InvalidDesign("trials must be positive".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..plan.noise_levels.len())
        .flat_map(|l| (0..plan.trials).map(move |t| (l, t)))
        .collect();
    let trials = jobs
        .par_iter()
        .map(|&(level, trial)| {
            let d = PlantedDesign {
                noise: plan.noise_levels[level],
                seed: trial_seed(plan.master_seed, level, trial),
                ..design.clone()
            };
            score_trial(&d, plan.setup, &source, options, normalization).map(|s| (level, s))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(summarize(&plan.noise_levels, trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use thc_core::stats::BootstrapConfig;

    #[test]
    fn matches_sequential_bootstrap() {
        let m = ScoreMatrix::new(vec![vec![0.1, 0.5, 0.2, 0.9], vec![1.5, 1.1, 0.7]]).unwrap();
        let source = IntervalSource::IqmBootstrap(BootstrapConfig {
            resamples: 300,
            confidence: 0.9,
            seed: 4,
        });
        let seq = source.estimate(&m).unwrap();
        for threads in [1, 3] {
            assert_eq!(
                with_threads(threads, || ParallelEstimator(source).estimate(&m).unwrap()),
                seq
            );
        }
    }
}
