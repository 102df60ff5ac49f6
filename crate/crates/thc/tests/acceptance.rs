//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thc::parallel::{with_threads, ParallelEstimator};
use thc_core::consistency::{
    assemble_profiles, kendall_tau_matrix, kendall_w, thc, AssemblyOptions, PtpNormalization,
    RankProfile, Setup,
};
use thc_core::ranking::{compute_rankings, RankingMode};
use thc_core::stats::{
    iqm, stratified_bootstrap_ci, BootstrapConfig, Interval, IntervalEstimator, IntervalSource,
    ScoreMatrix,
};
use thc_core::synth::{generate, PlantedDesign, PlantedHyperparameter};

/// Tolerance for THC oracles.
const THC_TOL: f64 = 1e-12;
/// Tolerance for Kendall statistics against pair counting.
const KENDALL_TOL: f64 = 1e-12;
const AC1_BUDGET: Duration = Duration::from_millis(1);
const AC6_BUDGET: Duration = Duration::from_secs(30);
const AC8_BUDGET: Duration = Duration::from_secs(60);
const AC5_PROFILES: usize = 1000;
const AC6_INSTANCES: usize = 10_000;
const AC7_MATRICES: usize = 20;
const AC9_PROFILES: usize = 1000;

type Check = Result<String, String>;
type Criterion = (&'static str, &'static str, fn() -> Check);

fn iv(lo: f64, hi: f64) -> Interval {
    Interval::new(lo, hi).unwrap()
}

fn profile(rows: &[&[f64]]) -> RankProfile {
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    let values = (0..rows.len()).map(|i| format!("v{i}")).collect();
    let contexts = (0..rows[0].len()).map(|j| format!("c{j}")).collect();
    RankProfile::new("h".into(), values, contexts, rows).unwrap()
}

fn ranks_by_label(settings: &[(String, Interval)], mode: RankingMode) -> BTreeMap<String, f64> {
    compute_rankings(settings, mode)
        .unwrap()
        .into_iter()
        .map(|r| (r.label, r.final_rank))
        .collect()
}

fn ac1() -> Check {
    let settings: Vec<(String, Interval)> = [
        ("1e-2", iv(200.0, 300.0)),
        ("1e-1", iv(250.0, 350.0)),
        ("1e0", iv(400.0, 600.0)),
        ("1e1", iv(110.0, 220.0)),
        ("1e2", iv(30.0, 70.0)),
    ]
    .into_iter()
    .map(|(l, i)| (l.to_owned(), i))
    .collect();
    let expected = [3.0, 2.5, 1.0, 3.5, 5.0];
    let got = ranks_by_label(&settings, RankingMode::Span);
    let got: Vec<f64> = settings.iter().map(|(l, _)| got[l]).collect();
    if got != expected {
        return Err(format!("ranks {got:?}, expected {expected:?}"));
    }
    let mut times: Vec<Duration> = (0..101)
        .map(|_| {
            let t = Instant::now();
            let r = compute_rankings(&settings, RankingMode::Span).unwrap();
            let e = t.elapsed();
            std::hint::black_box(r);
            e
        })
        .collect();
    times.sort();
    let median = times[50];
    if median >= AC1_BUDGET {
        return Err(format!("median runtime {median:?} >= {AC1_BUDGET:?}"));
    }
    Ok(format!("ranks {got:?}, median runtime {median:?}"))
}

fn ac2() -> Check {
    let settings: Vec<(String, Interval)> = vec![
        ("A".into(), iv(200.0, 300.0)),
        ("B".into(), iv(250.0, 350.0)),
        ("C".into(), iv(180.0, 260.0)),
    ];
    let got = ranks_by_label(&settings, RankingMode::Span);
    if got.values().all(|&r| r == 2.0) {
        Ok(format!("{got:?}"))
    } else {
        Err(format!("{got:?}, expected all 2"))
    }
}

fn thc_oracle(cases: &[(&str, RankProfile, f64)]) -> Check {
    let mut details = Vec::new();
    for (name, p, expected) in cases {
        let got = thc(p, PtpNormalization::MaxSpread);
        if (got - expected).abs() >= THC_TOL {
            return Err(format!("THC {name} = {got}, expected {expected}"));
        }
        details.push(format!("{name}={got}"));
    }
    Ok(details.join(", "))
}

fn ac3() -> Check {
    let a1 = profile(&[
        &[1.0, 1.0, 2.0, 1.0, 3.0],
        &[2.0, 3.0, 2.0, 3.0, 2.0],
        &[3.0, 2.0, 2.0, 2.0, 1.0],
    ]);
    let b1 = profile(&[
        &[1.0, 2.0, 1.0, 2.0, 1.0],
        &[2.0, 1.0, 2.0, 1.0, 2.0],
        &[3.0, 3.0, 3.0, 3.0, 3.0],
    ]);
    thc_oracle(&[("A1", a1, 2.5 / 3.0), ("B1", b1, 1.0 / 3.0)])
}

fn ac4() -> Check {
    let a2 = profile(&[
        &[1.0, 1.0, 1.0, 3.0],
        &[2.0, 2.0, 2.0, 2.0],
        &[3.0, 3.0, 3.0, 1.0],
        &[4.0, 4.0, 4.0, 4.0],
    ]);
    let b2 = profile(&[
        &[1.0, 1.0, 1.0, 1.0],
        &[2.5, 2.0, 3.0, 2.0],
        &[2.5, 3.0, 2.0, 3.0],
    ]);
    thc_oracle(&[("A2", a2, 1.0 / 3.0), ("B2", b2, 1.0 / 3.0)])
}

/// A profile whose columns are rankings of random intervals.
fn random_profile(rng: &mut ChaCha8Rng, m: usize, k: usize) -> RankProfile {
    let labels: Vec<String> = (0..m).map(|i| format!("v{i}")).collect();
    let columns: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let settings: Vec<(String, Interval)> = labels
                .iter()
                .map(|l| {
                    let lo = rng.random_range(0..30) as f64;
                    (l.clone(), iv(lo, lo + rng.random_range(0..8) as f64))
                })
                .collect();
            let ranks = ranks_by_label(&settings, RankingMode::Span);
            labels.iter().map(|l| ranks[l]).collect()
        })
        .collect();
    let rows = (0..m)
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();
    RankProfile::new(
        "h".into(),
        labels,
        (0..k).map(|j| format!("c{j}")).collect(),
        rows,
    )
    .unwrap()
}

fn ac5() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut checked, mut attempts) = (0, 0);
    while checked < AC5_PROFILES {
        attempts += 1;
        let m = rng.random_range(2..8);
        let k = rng.random_range(2..6);
        let p = random_profile(&mut rng, m, k);
        if p.ptps().iter().sum::<f64>() == 0.0 {
            continue;
        }
        let got = thc(&p, PtpNormalization::SumOfSpreads);
        if (got - 1.0 / m as f64).abs() >= THC_TOL {
            return Err(format!("m={m}: THC {got} != 1/m for {:?}", p.rows()));
        }
        checked += 1;
    }
    Ok(format!(
        "{checked} inconsistent profiles (of {attempts} drawn) all give 1/m"
    ))
}

fn ac6() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut violations = Vec::new();
    for instance in 0..AC6_INSTANCES {
        let m = rng.random_range(1..13);
        let settings: Vec<(String, Interval)> = (0..m)
            .map(|i| {
                let lo = rng.random_range(-50..50) as f64;
                (format!("s{i}"), iv(lo, lo + rng.random_range(0..25) as f64))
            })
            .collect();
        let base = ranks_by_label(&settings, RankingMode::Span);

        let mut shuffled = settings.clone();
        shuffled.shuffle(&mut rng);
        if ranks_by_label(&shuffled, RankingMode::Span) != base {
            violations.push(format!("#{instance}: permutation"));
        }

        let shift = rng.random_range(-1000..1000) as f64;
        let moved: Vec<_> = settings
            .iter()
            .map(|(l, i)| (l.clone(), iv(i.lower() + shift, i.upper() + shift)))
            .collect();
        if ranks_by_label(&moved, RankingMode::Span) != base {
            violations.push(format!("#{instance}: translation"));
        }

        if base.values().any(|&r| !(1.0..=m as f64).contains(&r)) {
            violations.push(format!("#{instance}: bounds"));
        }

        let mut order: Vec<usize> = (0..m).collect();
        order.shuffle(&mut rng);
        let disjoint: Vec<(String, Interval)> = order
            .iter()
            .enumerate()
            .map(|(i, &pos)| {
                (
                    format!("s{i}"),
                    iv(10.0 * pos as f64, 10.0 * pos as f64 + 5.0),
                )
            })
            .collect();
        let got = ranks_by_label(&disjoint, RankingMode::Span);
        for (i, &pos) in order.iter().enumerate() {
            if got[&format!("s{i}")] != (m - pos) as f64 {
                violations.push(format!("#{instance}: disjoint order"));
                break;
            }
        }
    }
    let elapsed = start.elapsed();
    if !violations.is_empty() {
        return Err(format!(
            "{} violations, first: {}",
            violations.len(),
            violations[0]
        ));
    }
    if elapsed >= AC6_BUDGET {
        return Err(format!("took {elapsed:?}"));
    }
    Ok(format!(
        "{AC6_INSTANCES} instances, 0 violations, {elapsed:?}"
    ))
}

/// Slow stratified resampler that materializes every resample.
fn reference_bootstrap(rows: &[Vec<f64>], cfg: &BootstrapConfig) -> (f64, f64) {
    let mut stats = Vec::new();
    for b in 0..cfg.resamples {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(b as u64);
        let resampled: Vec<Vec<f64>> = rows
            .iter()
            .map(|row| {
                (0..row.len())
                    .map(|_| row[rng.random_range(0..row.len())])
                    .collect()
            })
            .collect();
        let mut pooled = resampled.concat();
        pooled.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let k = pooled.len() / 4;
        let kept = &pooled[k..pooled.len() - k];
        let shift = kept[0];
        let mut acc = 0.0;
        for x in kept {
            acc += x - shift;
        }
        stats.push(shift + acc / kept.len() as f64);
    }
    stats.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantile = |q: f64| {
        let h = q * (stats.len() - 1) as f64;
        let lo = h.floor() as usize;
        let frac = h - lo as f64;
        if frac == 0.0 {
            stats[lo]
        } else {
            stats[lo] + frac * (stats[lo + 1] - stats[lo])
        }
    };
    let alpha = (1.0 - cfg.confidence) / 2.0;
    (quantile(alpha), quantile(1.0 - alpha))
}

fn ac7() -> Check {
    let eight: Vec<f64> = (1..=8).map(f64::from).collect();
    let q = iqm(&eight).unwrap();
    if q != 4.5 {
        return Err(format!("iqm([1..8]) = {q}"));
    }

    let constant = ScoreMatrix::new(vec![vec![0.7; 5]; 3]).unwrap();
    let ci = stratified_bootstrap_ci(&constant, &BootstrapConfig::default()).unwrap();
    if ci.width() != 0.0 || ci.lower() != 0.7 {
        return Err(format!("constant-data CI {ci:?}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..AC7_MATRICES as u64 {
        let rows: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..5).map(|_| rng.random_range(-1.0..2.0)).collect())
            .collect();
        let cfg = BootstrapConfig {
            resamples: 1000,
            confidence: 0.95,
            seed: 100 + trial,
        };
        let got = stratified_bootstrap_ci(&ScoreMatrix::new(rows.clone()).unwrap(), &cfg).unwrap();
        let (lo, hi) = reference_bootstrap(&rows, &cfg);
        if got.lower().to_bits() != lo.to_bits() || got.upper().to_bits() != hi.to_bits() {
            return Err(format!(
                "matrix {trial}: ({}, {}) vs reference ({lo}, {hi})",
                got.lower(),
                got.upper()
            ));
        }
    }

    let rows: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..7).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let matrix = ScoreMatrix::new(rows).unwrap();
    let source = IntervalSource::IqmBootstrap(BootstrapConfig {
        resamples: 4000,
        confidence: 0.9,
        seed: 42,
    });
    let sequential = source.estimate(&matrix).unwrap();
    for threads in [1, 2, 4, 8] {
        let parallel = with_threads(threads, || {
            ParallelEstimator(source).estimate(&matrix).unwrap()
        });
        if parallel != sequential {
            return Err(format!(
                "{threads} threads: {parallel:?} vs sequential {sequential:?}"
            ));
        }
    }
    Ok(format!(
        "iqm([1..8]) = 4.5, constant CI width 0, {AC7_MATRICES} matrices bit-identical to reference, 1/2/4/8 threads identical"
    ))
}

fn names(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

fn planted(name: &str, m: usize) -> PlantedHyperparameter {
    PlantedHyperparameter {
        name: name.into(),
        values: names("v", m),
        base: vec![],
        agent: BTreeMap::new(),
        environment: BTreeMap::new(),
        data_regime: BTreeMap::new(),
    }
}

fn design(
    agents: usize,
    environments: usize,
    regimes: usize,
    hyperparameters: Vec<PlantedHyperparameter>,
) -> PlantedDesign {
    PlantedDesign {
        seed: 8,
        noise: 0.0,
        seeds_per_cell: 3,
        agents: names("a", agents),
        environments: names("e", environments),
        data_regimes: names("r", regimes),
        hyperparameters,
    }
}

fn ac8() -> Check {
    let start = Instant::now();
    let estimator = IntervalSource::default();
    let opts = AssemblyOptions::default();
    let mut failures = Vec::new();

    // Consistent: same strict order everywhere, with context-dependent offsets.
    let mut hps = Vec::new();
    for m in 2..=6 {
        let mut hp = planted(&format!("h{m}"), m);
        hp.base = (0..m).map(|i| 1.0 - 0.1 * i as f64).collect();
        hp.agent.insert("a1".into(), vec![0.5; m]);
        hp.environment.insert("e2".into(), vec![-0.3; m]);
        hp.data_regime.insert("r1".into(), vec![2.0; m]);
        hps.push(hp);
    }
    let consistent = generate(&design(2, 3, 2, hps)).unwrap();
    let mut consistent_profiles = 0;
    for setup in Setup::ALL {
        let a = assemble_profiles(&consistent, setup, &estimator, &opts).unwrap();
        for p in &a.profiles {
            consistent_profiles += 1;
            let t = thc(&p.profile, PtpNormalization::MaxSpread);
            if t != 0.0 {
                failures.push(format!(
                    "consistent {} {}: THC {t}",
                    setup.name(),
                    p.profile.hyperparameter()
                ));
            }
        }
    }

    // Full reversal between two contexts.
    let mut reversal = Vec::new();
    for m in 2..=6 {
        let mut hp = planted("rev", m);
        hp.environment
            .insert("e0".into(), (0..m).map(|i| (m - i) as f64).collect());
        hp.environment
            .insert("e1".into(), (0..m).map(|i| (i + 1) as f64).collect());
        let ds = generate(&design(1, 2, 1, vec![hp])).unwrap();
        let a = assemble_profiles(&ds, Setup::AcrossEnvironments, &estimator, &opts).unwrap();
        let t = thc(&a.profiles[0].profile, PtpNormalization::MaxSpread);
        reversal.push(format!("m={m}: {t:.4}"));
        if t != 1.0 {
            failures.push(format!("reversal m={m}: THC {t}, expected 1"));
        }
    }

    // Noiseless recovery of a planted strict ranking per environment.
    let mut hp = planted("perm", 5);
    let mut rng = ChaCha8Rng::seed_from_u64(88);
    let mut planted_ranks = BTreeMap::new();
    for e in names("e", 4) {
        let mut order: Vec<usize> = (1..=5).collect();
        order.shuffle(&mut rng);
        hp.environment
            .insert(e.clone(), order.iter().map(|&r| -(r as f64)).collect());
        planted_ranks.insert(e, order);
    }
    let ds = generate(&design(1, 4, 1, vec![hp])).unwrap();
    let a = assemble_profiles(&ds, Setup::AcrossEnvironments, &estimator, &opts).unwrap();
    for table in &a.profiles[0].tables {
        for (i, v) in names("v", 5).iter().enumerate() {
            let expected = planted_ranks[&table.context][i] as f64;
            if table.rank_of(v) != Some(expected) {
                failures.push(format!(
                    "recovery {} {v}: {:?} vs planted {expected}",
                    table.context,
                    table.rank_of(v)
                ));
            }
        }
    }

    let elapsed = start.elapsed();
    if elapsed >= AC8_BUDGET {
        failures.push(format!("took {elapsed:?}"));
    }
    let summary = format!(
        "{consistent_profiles} consistent profiles; reversal THC [{}]; {elapsed:?}",
        reversal.join(", ")
    );
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{}; {summary}", failures.join("; ")))
    }
}

fn pair_count_tau(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut c, mut d, mut tx, mut ty) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let (dx, dy) = (x[i] - x[j], y[i] - y[j]);
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tx += 1.0;
            } else if dy == 0.0 {
                ty += 1.0;
            } else if (dx > 0.0) == (dy > 0.0) {
                c += 1.0;
            } else {
                d += 1.0;
            }
        }
    }
    let (nx, ny) = (c + d + ty, c + d + tx);
    (nx > 0.0 && ny > 0.0).then(|| (c - d) / (nx * ny).sqrt())
}

fn ac9() -> Check {
    let identical = profile(&[
        &[1.0, 1.0, 1.0],
        &[2.0, 2.0, 2.0],
        &[3.0, 3.0, 3.0],
        &[4.0, 4.0, 4.0],
    ]);
    let w = kendall_w(&identical).unwrap();
    if w != Some(1.0) {
        return Err(format!("identical rankings: W = {w:?}"));
    }
    let taus = kendall_tau_matrix(&identical).unwrap();
    if taus.iter().flatten().any(|t| *t != Some(1.0)) {
        return Err(format!("identical rankings: tau {taus:?}"));
    }
    let reversed = profile(&[&[1.0, 4.0], &[2.0, 3.0], &[3.0, 2.0], &[4.0, 1.0]]);
    let taus = kendall_tau_matrix(&reversed).unwrap();
    if taus[0][1] != Some(-1.0) || taus[1][0] != Some(-1.0) {
        return Err(format!("reversal: tau {taus:?}"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut pairs = 0;
    for _ in 0..AC9_PROFILES {
        let m = rng.random_range(2..7);
        let k = rng.random_range(2..5);
        let p = random_profile(&mut rng, m, k);
        let taus = kendall_tau_matrix(&p).unwrap();
        for (a, row) in taus.iter().enumerate() {
            for (b, tau) in row.iter().enumerate() {
                let (x, y) = (p.column(a), p.column(b));
                match (*tau, pair_count_tau(&x, &y)) {
                    (Some(t), Some(r)) if (t - r).abs() < KENDALL_TOL => pairs += 1,
                    (None, None) => pairs += 1,
                    other => return Err(format!("columns {x:?} / {y:?}: {other:?}")),
                }
            }
        }
    }
    Ok(format!("W = 1 and tau = 1 on identical, tau = -1 on reversal, {pairs} pairs over {AC9_PROFILES} profiles match pair counting"))
}

fn run_report(out: &Path, threads: usize) -> Result<(), String> {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/sample");
    let o = Command::new(env!("CARGO_BIN_EXE_thc"))
        .args(["report", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(out)
        .args(["--threads", &threads.to_string()])
        .output()
        .map_err(|e| e.to_string())?;
    if o.status.success() {
        Ok(())
    } else {
        Err(format!(
            "report exited {:?}: {}",
            o.status.code(),
            String::from_utf8_lossy(&o.stderr)
        ))
    }
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>, String> {
    let mut files: Vec<(PathBuf, Vec<u8>)> = std::fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let p = e.unwrap().path();
            let bytes = std::fs::read(&p).unwrap();
            (PathBuf::from(p.file_name().unwrap()), bytes)
        })
        .collect();
    files.sort();
    Ok(files)
}

fn ac10() -> Check {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let n = std::thread::available_parallelism()
        .map_or(4, |n| n.get())
        .max(4);
    let runs = [("first", 1), ("second", 1), ("parallel", n)];
    for (name, threads) in runs {
        run_report(&tmp.path().join(name), threads)?;
    }
    let first = read_dir_sorted(&tmp.path().join("first"))?;
    for (name, threads) in &runs[1..] {
        if read_dir_sorted(&tmp.path().join(name))? != first {
            return Err(format!(
                "{name} run ({threads} threads) differs from the first"
            ));
        }
    }
    let bytes: usize = first.iter().map(|(_, b)| b.len()).sum();
    Ok(format!(
        "{} files, {bytes} bytes identical across two 1-thread runs and a {n}-thread run",
        first.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("AC1", "ranking oracle", ac1),
        ("AC2", "full-overlap oracle", ac2),
        ("AC3", "THC oracle, five games", ac3),
        ("AC4", "THC oracle, fractional ranks", ac4),
        ("AC5", "sum-of-spreads degeneracy", ac5),
        ("AC6", "ranking property suite", ac6),
        ("AC7", "IQM and bootstrap", ac7),
        ("AC8", "end-to-end synthetic", ac8),
        ("AC9", "Kendall baselines", ac9),
        ("AC10", "report reproducibility", ac10),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS {id} {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {id} {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
