//! Command-line interface.
//!
//! Exit codes: 0 success, 1 invalid input or IO failure, 2 usage error,
//! 3 nothing meaningful to compute.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thc_core::consistency::{PtpNormalization, Setup};
use thc_core::data::SweepDataset;
use thc_core::ranking::RankingMode;
use thc_core::stats::{BootstrapConfig, IntervalSource};
use thc_core::synth::generate;

use crate::io::{self, DatasetPaths, DatasetSources, IoError};
use crate::parallel::{recovery_study, with_threads, ParallelEstimator};
use crate::rank::{rank_context, ranking_csv, RankError, RankQuery};
use crate::report::{
    analyze_setup, build_report, fixed_label, study_csv, thc_table, AnalysisOptions, InputDigests,
};

#[derive(Debug, Parser)]
#[command(
    name = "thc",
    version,
    about = "Hyper-parameter ranking consistency across agents, environments and data regimes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a dataset.
    Validate(DataArgs),
    /// Rank one hyper-parameter's values within a single context.
    Rank(RankArgs),
    /// THC score of every hyper-parameter for one setup.
    Thc(ThcArgs),
    /// Write the full report bundle for all setups.
    Report(ReportArgs),
    /// Generate a synthetic dataset from a planted design.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Directory holding runs.csv, baselines.csv and schema.toml.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Run log (overrides --data).
    #[arg(long)]
    pub runs: Option<PathBuf>,
    /// Baseline table (overrides --data).
    #[arg(long)]
    pub baselines: Option<PathBuf>,
    /// Schema file, or `builtin:atari` (overrides --data).
    #[arg(long)]
    pub schema: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntervalKind {
    /// IQM with a stratified bootstrap confidence interval.
    IqmCi,
    /// Mean ± one standard deviation.
    MeanSd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    MaxSpread,
    SumOfSpreads,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RankingArg {
    Span,
    OverlapSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SetupArg {
    Agents,
    Environments,
    DataRegimes,
}

impl From<SetupArg> for Setup {
    fn from(s: SetupArg) -> Self {
        match s {
            SetupArg::Agents => Setup::AcrossAgents,
            SetupArg::Environments => Setup::AcrossEnvironments,
            SetupArg::DataRegimes => Setup::AcrossDataRegimes,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimationArgs {
    #[arg(long, value_enum, default_value = "iqm-ci")]
    pub interval: IntervalKind,
    /// Bootstrap replicates.
    #[arg(long, default_value_t = 2000)]
    pub resamples: usize,
    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
    /// Bootstrap seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "span")]
    pub ranking: RankingArg,
    /// Values with fewer runs in a context are not ranked.
    #[arg(long, default_value_t = 2)]
    pub min_seeds: usize,
    /// Worker threads (0 = all cores). Never changes results.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

#[derive(Debug, Args)]
pub struct ScoringArgs {
    #[arg(long, value_enum, default_value = "max-spread")]
    pub normalization: NormalizationArg,
    /// Analyse each environment separately instead of pooling them.
    #[arg(long)]
    pub per_environment: bool,
    /// Add Kendall's W and mean pairwise tau.
    #[arg(long)]
    pub kendall: bool,
}

#[derive(Debug, Args)]
pub struct RankArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    #[arg(long)]
    pub agent: String,
    /// Omit to pool all environments.
    #[arg(long)]
    pub environment: Option<String>,
    #[arg(long)]
    pub data_regime: String,
    #[arg(long)]
    pub hyperparameter: String,
    /// Also write the table here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ThcArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    #[arg(long, value_enum)]
    pub setup: SetupArg,
    /// Fail with exit code 3 when Kendall's W is undefined for any profile.
    #[arg(long)]
    pub strict_kendall: bool,
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    #[command(flatten)]
    pub scoring: ScoringArgs,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Design file (TOML).
    #[arg(long)]
    pub design: PathBuf,
    /// Output directory for runs.csv, baselines.csv and schema.toml.
    #[arg(long)]
    pub out: PathBuf,
    /// Also run the design's `[study]` and write study.csv.
    #[arg(long)]
    pub study: bool,
    #[command(flatten)]
    pub estimation: EstimationArgs,
    #[command(flatten)]
    pub scoring: ScoringArgs,
}

#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Usage(String),
    Degenerate(String),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Usage(_) => 2,
            Failure::Degenerate(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Invalid(m) | Failure::Usage(m) | Failure::Degenerate(m) => m,
        }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

impl DataArgs {
    fn paths(&self) -> Result<DatasetPaths, Failure> {
        let base = self.data.as_deref().map(DatasetPaths::in_dir);
        let missing = |flag: &str| Failure::Usage(format!("--{flag} or --data is required"));
        Ok(DatasetPaths {
            runs: self
                .runs
                .clone()
                .or_else(|| base.as_ref().map(|b| b.runs.clone()))
                .ok_or_else(|| missing("runs"))?,
            baselines: self
                .baselines
                .clone()
                .or_else(|| base.as_ref().map(|b| b.baselines.clone()))
                .ok_or_else(|| missing("baselines"))?,
            schema: self
                .schema
                .clone()
                .or_else(|| base.as_ref().map(|b| b.schema.clone()))
                .ok_or_else(|| missing("schema"))?,
        })
    }

    fn load(&self) -> Result<(DatasetSources, SweepDataset), Failure> {
        let sources = DatasetSources::read(&self.paths()?)?;
        let dataset = sources.parse()?;
        Ok((sources, dataset))
    }
}

impl EstimationArgs {
    fn source(&self) -> Result<IntervalSource, Failure> {
        match self.interval {
            IntervalKind::MeanSd => Ok(IntervalSource::MeanSpread),
            IntervalKind::IqmCi => {
                let cfg = BootstrapConfig {
                    resamples: self.resamples,
                    confidence: self.confidence,
                    seed: self.seed,
                };
                cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
                Ok(IntervalSource::IqmBootstrap(cfg))
            }
        }
    }

    fn ranking(&self) -> RankingMode {
        match self.ranking {
            RankingArg::Span => RankingMode::Span,
            RankingArg::OverlapSet => RankingMode::OverlapSet,
        }
    }

    fn options(&self, scoring: &ScoringArgs) -> Result<AnalysisOptions, Failure> {
        if self.min_seeds == 0 {
            return Err(Failure::Usage("--min-seeds must be at least 1".into()));
        }
        Ok(AnalysisOptions {
            interval: self.source()?,
            ranking: self.ranking(),
            normalization: match scoring.normalization {
                NormalizationArg::MaxSpread => PtpNormalization::MaxSpread,
                NormalizationArg::SumOfSpreads => PtpNormalization::SumOfSpreads,
            },
            pool_environments: !scoring.per_environment,
            min_seeds: self.min_seeds,
            kendall: scoring.kendall,
        })
    }
}

fn emit(text: &str, out: Option<&PathBuf>) -> Outcome {
    print!("{text}");
    let _ = std::io::stdout().flush();
    if let Some(path) = out {
        io::write_file(path, text)?;
    }
    Ok(())
}

fn validate(args: &DataArgs) -> Outcome {
    let (_, dataset) = args.load()?;
    println!("ok: {}", io::describe(&dataset));
    Ok(())
}

fn rank(args: &RankArgs) -> Outcome {
    let (_, dataset) = args.data.load()?;
    let source = args.estimation.source()?;
    if args.estimation.min_seeds == 0 {
        return Err(Failure::Usage("--min-seeds must be at least 1".into()));
    }
    let query = RankQuery {
        agent: &args.agent,
        environment: args.environment.as_deref(),
        data_regime: &args.data_regime,
        hyperparameter: &args.hyperparameter,
    };
    let outcome = with_threads(args.estimation.threads, || {
        rank_context(
            &dataset,
            &query,
            &ParallelEstimator(source),
            args.estimation.ranking(),
            args.estimation.min_seeds,
        )
    })
    .map_err(|e| match e {
        RankError::Unknown { .. } => Failure::Usage(e.to_string()),
        RankError::NoRuns { .. } | RankError::NothingToRank(_) => {
            Failure::Degenerate(e.to_string())
        }
        _ => Failure::Invalid(e.to_string()),
    })?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    emit(&ranking_csv(&outcome.entries), args.out.as_ref())
}

fn thc(args: &ThcArgs) -> Outcome {
    let (_, dataset) = args.data.load()?;
    let mut options = args.estimation.options(&args.scoring)?;
    options.kendall |= args.strict_kendall;
    let setup = Setup::from(args.setup);
    let contexts = dataset.present(setup.varying()).len();
    if contexts < 2 {
        return Err(Failure::Degenerate(format!(
            "{} needs at least 2 {} contexts, the dataset has {contexts}",
            setup.name(),
            setup.varying()
        )));
    }
    let section = with_threads(args.estimation.threads, || {
        analyze_setup(&dataset, setup, &options)
    })
    .map_err(|e| Failure::Invalid(e.to_string()))?;
    for w in &section.warnings {
        eprintln!(
            "warning: {} [{}]: {}",
            w.hyperparameter,
            fixed_label(&w.fixed),
            w.message
        );
    }
    for s in &section.report.skipped {
        eprintln!(
            "skipped: {} [{}]: {}",
            s.hyperparameter,
            fixed_label(&s.fixed),
            s.reason
        );
    }
    emit(
        &thc_table([&section.report], options.kendall),
        args.out_csv.as_ref(),
    )?;
    if let Some(path) = &args.out_json {
        let mut json = serde_json::to_string_pretty(&section.report).expect("report serializes");
        json.push('\n');
        io::write_file(path, &json)?;
    }
    if args.strict_kendall {
        let undefined: Vec<String> = section
            .report
            .scores
            .iter()
            .filter(|s| s.kendall.is_none_or(|k| k.w.is_none()))
            .map(|s| format!("{} [{}]", s.hyperparameter, fixed_label(&s.fixed)))
            .collect();
        if !undefined.is_empty() {
            return Err(Failure::Degenerate(format!(
                "Kendall's W is undefined for {}",
                undefined.join(", ")
            )));
        }
    }
    Ok(())
}

fn report(args: &ReportArgs) -> Outcome {
    let (sources, dataset) = args.data.load()?;
    let options = args.estimation.options(&args.scoring)?;
    let bundle = with_threads(args.estimation.threads, || {
        build_report(&dataset, InputDigests::of(&sources), &options)
    })
    .map_err(|e| Failure::Invalid(e.to_string()))?;
    for s in &bundle.setups {
        if let Some(note) = &s.note {
            eprintln!("note: {note}");
        }
    }
    bundle.write(&args.out)?;
    println!(
        "wrote {} files to {}",
        bundle.files().len(),
        args.out.display()
    );
    Ok(())
}

fn synth(args: &SynthArgs) -> Outcome {
    let text = std::fs::read_to_string(&args.design)
        .map_err(|e| Failure::Invalid(format!("{}: {e}", args.design.display())))?;
    let (design, plan) = io::parse_design(&text)?;
    let dataset = generate(&design).map_err(|e| Failure::Invalid(format!("design: {e}")))?;
    io::write_dataset(&dataset, &args.out)?;
    println!("ok: {}", io::describe(&dataset));
    if args.study {
        let plan = plan
            .ok_or_else(|| Failure::Usage("--study needs a [study] table in the design".into()))?;
        let options = args.estimation.options(&args.scoring)?;
        let rows = with_threads(args.estimation.threads, || {
            recovery_study(
                &design,
                &plan,
                options.interval,
                &options.assembly(),
                options.normalization,
            )
        })
        .map_err(|e| Failure::Invalid(format!("study: {e}")))?;
        io::write_file(&args.out.join("study.csv"), &study_csv(&rows))?;
        println!("wrote study.csv ({} rows)", rows.len());
    }
    Ok(())
}

pub fn execute(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Validate(a) => validate(a),
        Command::Rank(a) => rank(a),
        Command::Thc(a) => thc(a),
        Command::Report(a) => report(a),
        Command::Synth(a) => synth(a),
    }
}

/// Parses `std::env::args`, runs the command and maps the result to an exit code.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
