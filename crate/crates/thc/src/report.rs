//! Report bundle: consistency scores, ranking tables and interval series for
//! every setup, written as JSON, CSV and an SVG bar chart.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thc_core::consistency::{
    assemble_profiles, AssemblyOptions, ConsistencyError, ConsistencyReport, PtpNormalization,
    Setup, Skipped, ValueEstimate, Warning,
};
use thc_core::data::{Axis, ContextKey, SweepDataset};
use thc_core::ranking::{RankingMode, RankingTable};
use thc_core::stats::IntervalSource;
use thc_core::synth::StudyRow;

use crate::io::{into_string, write_file, DatasetSources, IoError};
use crate::parallel::ParallelEstimator;

/// Everything that, together with the inputs, determines the output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalysisOptions {
    pub interval: IntervalSource,
    pub ranking: RankingMode,
    pub normalization: PtpNormalization,
    pub pool_environments: bool,
    pub min_seeds: usize,
    pub kendall: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        let a = AssemblyOptions::default();
        Self {
            interval: IntervalSource::default(),
            ranking: a.ranking,
            normalization: PtpNormalization::default(),
            pool_environments: a.pool_environments,
            min_seeds: a.min_seeds,
            kendall: false,
        }
    }
}

impl AnalysisOptions {
    pub fn assembly(&self) -> AssemblyOptions {
        AssemblyOptions {
            ranking: self.ranking,
            pool_environments: self.pool_environments,
            min_seeds: self.min_seeds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputDigests {
    pub runs: String,
    pub baselines: String,
    pub schema: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl InputDigests {
    pub fn of(sources: &DatasetSources) -> Self {
        Self {
            runs: sha256_hex(&sources.runs),
            baselines: sha256_hex(&sources.baselines),
            schema: sha256_hex(sources.schema.as_bytes()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub inputs: InputDigests,
    pub options: AnalysisOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProfileDetail {
    pub fixed: ContextKey,
    pub hyperparameter: String,
    pub rankings: Vec<RankingTable>,
    pub estimates: Vec<ValueEstimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SetupSection {
    pub setup: Setup,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub report: ConsistencyReport,
    pub profiles: Vec<ProfileDetail>,
    pub warnings: Vec<Warning>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub provenance: Provenance,
    pub setups: Vec<SetupSection>,
}

/// Scores one setup. Bootstrap work runs on the current rayon pool.
pub fn analyze_setup(
    dataset: &SweepDataset,
    setup: Setup,
    options: &AnalysisOptions,
) -> Result<SetupSection, ConsistencyError> {
    let assembly = assemble_profiles(
        dataset,
        setup,
        &ParallelEstimator(options.interval),
        &options.assembly(),
    )?;
    let report =
        ConsistencyReport::from_assembly(&assembly, options.normalization, options.kendall);
    let contexts = dataset.present(setup.varying()).len();
    let note = (contexts < 2).then(|| {
        format!(
            "{} has {contexts} context(s); nothing to compare",
            setup.name()
        )
    });
    let profiles = assembly
        .profiles
        .into_iter()
        .map(|p| ProfileDetail {
            fixed: p.fixed,
            hyperparameter: p.profile.hyperparameter().to_owned(),
            rankings: p.tables,
            estimates: p.estimates,
        })
        .collect();
    Ok(SetupSection {
        setup,
        note,
        report,
        profiles,
        warnings: assembly.warnings,
    })
}

pub fn build_report(
    dataset: &SweepDataset,
    inputs: InputDigests,
    options: &AnalysisOptions,
) -> Result<ReportBundle, ConsistencyError> {
    let setups = Setup::ALL
        .iter()
        .map(|&s| analyze_setup(dataset, s, options))
        .collect::<Result<_, _>>()?;
    Ok(ReportBundle {
        provenance: Provenance {
            tool: "thc",
            version: env!("CARGO_PKG_VERSION"),
            inputs,
            options: *options,
        },
        setups,
    })
}

/// `axis=id` pairs of the fixed coordinates, `;`-separated.
pub fn fixed_label(key: &ContextKey) -> String {
    Axis::ALL
        .into_iter()
        .filter_map(|a| key.selector(a).map(|s| format!("{a}={s}")))
        .collect::<Vec<_>>()
        .join(";")
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "undefined".to_owned(), |v| v.to_string())
}

/// One row per scored profile. Kendall columns appear only when computed.
pub fn thc_table<'a>(
    reports: impl IntoIterator<Item = &'a ConsistencyReport>,
    kendall: bool,
) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![
        "setup",
        "fixed",
        "hyperparameter",
        "values",
        "contexts",
        "thc",
        "normalized_ptp",
    ];
    if kendall {
        header.extend(["kendall_w", "mean_tau"]);
    }
    w.write_record(&header).expect("in-memory write");
    for report in reports {
        for s in &report.scores {
            let ptps: Vec<String> = s
                .values
                .iter()
                .zip(&s.normalized_ptp)
                .map(|(v, p)| format!("{v}={p}"))
                .collect();
            let mut row = vec![
                report.setup.name().to_owned(),
                fixed_label(&s.fixed),
                s.hyperparameter.clone(),
                s.values.len().to_string(),
                s.contexts.len().to_string(),
                s.thc.to_string(),
                ptps.join(";"),
            ];
            if kendall {
                let k = s.kendall.unwrap_or_default();
                row.extend([opt(k.w), opt(k.mean_tau)]);
            }
            w.write_record(&row).expect("in-memory write");
        }
    }
    into_string(w)
}

pub fn skipped_table<'a>(entries: impl IntoIterator<Item = (Setup, &'a Skipped)>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["setup", "fixed", "hyperparameter", "reason"])
        .expect("in-memory write");
    for (setup, s) in entries {
        w.write_record([
            setup.name(),
            &fixed_label(&s.fixed),
            &s.hyperparameter,
            &s.reason,
        ])
        .expect("in-memory write");
    }
    into_string(w)
}

fn rankings_table(bundle: &ReportBundle) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "setup",
        "fixed",
        "hyperparameter",
        "context",
        "value",
        "lower",
        "upper",
        "initial_rank",
        "span_low",
        "span_high",
        "final_rank",
    ])
    .expect("in-memory write");
    for section in &bundle.setups {
        for p in &section.profiles {
            for t in &p.rankings {
                for e in &t.entries {
                    w.write_record([
                        section.setup.name(),
                        &fixed_label(&p.fixed),
                        &p.hyperparameter,
                        &t.context,
                        &e.label,
                        &e.interval.lower().to_string(),
                        &e.interval.upper().to_string(),
                        &e.initial_rank.to_string(),
                        &e.span.0.to_string(),
                        &e.span.1.to_string(),
                        &e.final_rank.to_string(),
                    ])
                    .expect("in-memory write");
                }
            }
        }
    }
    into_string(w)
}

fn series_table(bundle: &ReportBundle) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "setup",
        "fixed",
        "hyperparameter",
        "context",
        "value",
        "seeds",
        "point",
        "lower",
        "upper",
        "included",
    ])
    .expect("in-memory write");
    for section in &bundle.setups {
        for p in &section.profiles {
            for e in &p.estimates {
                let (point, lower, upper) = match &e.estimate {
                    Some(est) => (
                        est.point.to_string(),
                        est.interval.lower().to_string(),
                        est.interval.upper().to_string(),
                    ),
                    None => Default::default(),
                };
                w.write_record([
                    section.setup.name(),
                    &fixed_label(&p.fixed),
                    &p.hyperparameter,
                    &e.context,
                    &e.value,
                    &e.seeds.to_string(),
                    &point,
                    &lower,
                    &upper,
                    &e.included.to_string(),
                ])
                .expect("in-memory write");
            }
        }
    }
    into_string(w)
}

pub fn study_csv(rows: &[StudyRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "noise",
        "hyperparameter",
        "observations",
        "thc_mean",
        "thc_sd",
        "w_mean",
        "w_sd",
        "w_undefined",
    ])
    .expect("in-memory write");
    for r in rows {
        w.write_record([
            r.noise.to_string(),
            r.hyperparameter.clone(),
            r.observations.to_string(),
            r.thc_mean.to_string(),
            r.thc_sd.to_string(),
            opt(r.w_mean),
            opt(r.w_sd),
            r.w_undefined.to_string(),
        ])
        .expect("in-memory write");
    }
    into_string(w)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

const BAR: f64 = 18.0;
const GAP: f64 = 6.0;
const PLOT_HEIGHT: f64 = 160.0;
const LEFT: f64 = 40.0;

/// THC per hyper-parameter, one panel per setup. Skipped profiles whose
/// values are not comparable are drawn as grey placeholders.
pub fn thc_chart(bundle: &ReportBundle) -> String {
    struct Bar {
        label: String,
        thc: Option<f64>,
    }
    let panels: Vec<(Setup, Vec<Bar>)> = bundle
        .setups
        .iter()
        .map(|s| {
            let mut bars: Vec<Bar> = s
                .report
                .scores
                .iter()
                .map(|p| Bar {
                    label: format!("{} [{}]", p.hyperparameter, fixed_label(&p.fixed)),
                    thc: Some(p.thc),
                })
                .collect();
            bars.extend(
                s.report
                    .skipped
                    .iter()
                    .filter(|k| k.reason != "no runs")
                    .map(|k| Bar {
                        label: format!(
                            "{} [{}] not comparable",
                            k.hyperparameter,
                            fixed_label(&k.fixed)
                        ),
                        thc: None,
                    }),
            );
            (s.setup, bars)
        })
        .collect();
    let widest = panels
        .iter()
        .map(|(_, b)| b.len())
        .max()
        .unwrap_or(0)
        .max(1) as f64;
    let width = LEFT + widest * (BAR + GAP) + 20.0;
    let panel_height = PLOT_HEIGHT + 60.0;
    let height = panel_height * panels.len() as f64 + 10.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="10">"#
    );
    for (i, (setup, bars)) in panels.iter().enumerate() {
        let top = 10.0 + i as f64 * panel_height + 20.0;
        let base = top + PLOT_HEIGHT;
        let _ = writeln!(
            svg,
            r#"<text x="{LEFT:.1}" y="{:.1}" font-size="12">THC {}</text>"#,
            top - 6.0,
            setup.name()
        );
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT:.1}" y1="{top:.1}" x2="{LEFT:.1}" y2="{base:.1}" stroke="#000"/>"##
        );
        for tick in [0.0, 0.5, 1.0] {
            let y = base - tick * PLOT_HEIGHT;
            let _ = writeln!(
                svg,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{tick:.1}</text>"#,
                LEFT - 4.0,
                y + 3.0
            );
        }
        for (j, bar) in bars.iter().enumerate() {
            let x = LEFT + GAP + j as f64 * (BAR + GAP);
            let (h, fill) = match bar.thc {
                Some(t) => (t * PLOT_HEIGHT, "#4477aa"),
                None => (PLOT_HEIGHT, "#dddddd"),
            };
            let _ = writeln!(
                svg,
                r#"<rect x="{x:.1}" y="{:.1}" width="{BAR:.1}" height="{h:.1}" fill="{fill}"><title>{}</title></rect>"#,
                base - h,
                xml_escape(&match bar.thc {
                    Some(t) => format!("{}: {t}", bar.label),
                    None => bar.label.clone(),
                }),
            );
        }
        let _ = writeln!(
            svg,
            r##"<line x1="{LEFT:.1}" y1="{base:.1}" x2="{:.1}" y2="{base:.1}" stroke="#000"/>"##,
            LEFT + bars.len() as f64 * (BAR + GAP) + GAP
        );
    }
    svg.push_str("</svg>\n");
    svg
}

impl ReportBundle {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// File name → contents, in a fixed order.
    pub fn files(&self) -> Vec<(&'static str, String)> {
        vec![
            ("report.json", self.to_json()),
            (
                "thc.csv",
                thc_table(
                    self.setups.iter().map(|s| &s.report),
                    self.provenance.options.kendall,
                ),
            ),
            (
                "skipped.csv",
                skipped_table(
                    self.setups
                        .iter()
                        .flat_map(|s| s.report.skipped.iter().map(move |k| (s.setup, k))),
                ),
            ),
            ("rankings.csv", rankings_table(self)),
            ("series.csv", series_table(self)),
            ("thc.svg", thc_chart(self)),
        ]
    }

    pub fn write(&self, dir: &Path) -> Result<(), IoError> {
        for (name, contents) in self.files() {
            write_file(&dir.join(name), &contents)?;
        }
        Ok(())
    }
}
