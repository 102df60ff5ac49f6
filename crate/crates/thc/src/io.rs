//! Run-log, baseline and schema file formats.
//!
//! Run logs and baseline tables are comma-separated with a fixed header;
//! lines starting with `#` are comments. Schemas and synthetic designs are
//! TOML documents.

use std::fmt::Write as _;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use thc_core::data::{Baseline, BaselineTable, DataError, RunRecord, Schema, SweepDataset};
use thc_core::synth::{PlantedDesign, StudyPlan};
use thiserror::Error;

pub const RUN_LOG_HEADER: [&str; 7] = [
    "agent",
    "environment",
    "data_regime",
    "hyperparameter",
    "value",
    "seed",
    "final_score",
];
pub const BASELINE_HEADER: [&str; 3] = ["environment", "random_score", "human_score"];

/// Name accepted in place of a schema path for the bundled Atari grid.
pub const BUILTIN_ATARI: &str = "builtin:atari";
pub const ATARI_SCHEMA: &str = include_str!("../data/atari_schema.toml");

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{file}: {source}")]
    Data {
        file: &'static str,
        source: DataError,
    },
    #[error("{file}: {message}")]
    Format { file: &'static str, message: String },
}

fn malformed(line: u64, column: &str, message: impl Into<String>) -> DataError {
    DataError::Malformed {
        line,
        column: column.to_owned(),
        message: message.into(),
    }
}

/// Line of the first byte of a record, skipping comment and blank lines that
/// the reader attributes to the record.
fn record_line(bytes: &[u8], pos: &csv::Position) -> u64 {
    let (mut line, mut off) = (pos.line(), pos.byte() as usize);
    while off < bytes.len() && matches!(bytes[off], b'#' | b'\n' | b'\r') {
        match bytes[off..].iter().position(|&b| b == b'\n') {
            Some(nl) => {
                off += nl + 1;
                line += 1;
            }
            None => break,
        }
    }
    line
}

/// Reads rows, checking the header and field count; yields `(line, fields)`.
fn read_table<R: Read>(
    mut input: R,
    header: &[&str],
) -> Result<Vec<(u64, csv::StringRecord)>, DataError> {
    let mut bytes = Vec::new();
    input
        .read_to_end(&mut bytes)
        .map_err(|e| malformed(0, "-", e.to_string()))?;
    let reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(bytes.as_slice());
    let mut rows = Vec::new();
    let mut seen_header = false;
    for result in reader.into_records() {
        let record = result.map_err(|e| {
            let line = e.position().map_or(0, |p| record_line(&bytes, p));
            malformed(line, "-", e.to_string())
        })?;
        let line = record.position().map_or(0, |p| record_line(&bytes, p));
        if !seen_header {
            if record.iter().ne(header.iter().copied()) {
                let got: Vec<&str> = record.iter().collect();
                return Err(malformed(
                    line,
                    "header",
                    format!("expected {:?}, got {:?}", header.join(","), got.join(",")),
                ));
            }
            seen_header = true;
            continue;
        }
        if record.len() != header.len() {
            return Err(malformed(
                line,
                "-",
                format!("expected {} fields, got {}", header.len(), record.len()),
            ));
        }
        rows.push((line, record));
    }
    if !seen_header {
        return Err(malformed(1, "header", "missing header"));
    }
    Ok(rows)
}

fn field_f64(
    record: &csv::StringRecord,
    line: u64,
    idx: usize,
    column: &str,
) -> Result<f64, DataError> {
    let raw = &record[idx];
    raw.trim()
        .parse::<f64>()
        .map_err(|_| malformed(line, column, format!("{raw:?} is not a number")))
}

fn field_id(
    record: &csv::StringRecord,
    line: u64,
    idx: usize,
    column: &str,
) -> Result<String, DataError> {
    let raw = &record[idx];
    if raw.is_empty() {
        return Err(malformed(line, column, "empty field"));
    }
    Ok(raw.to_owned())
}

pub fn parse_run_log<R: Read>(input: R) -> Result<Vec<(u64, RunRecord)>, DataError> {
    read_table(input, &RUN_LOG_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let seed = r[5].trim().parse::<u64>().map_err(|_| {
                malformed(
                    line,
                    "seed",
                    format!("{:?} is not a non-negative integer", &r[5]),
                )
            })?;
            Ok((
                line,
                RunRecord {
                    agent: field_id(&r, line, 0, "agent")?,
                    environment: field_id(&r, line, 1, "environment")?,
                    data_regime: field_id(&r, line, 2, "data_regime")?,
                    hyperparameter: field_id(&r, line, 3, "hyperparameter")?,
                    value: field_id(&r, line, 4, "value")?,
                    seed,
                    final_score: field_f64(&r, line, 6, "final_score")?,
                },
            ))
        })
        .collect()
}

pub fn parse_baselines<R: Read>(input: R) -> Result<BaselineTable, DataError> {
    let entries = read_table(input, &BASELINE_HEADER)?
        .into_iter()
        .map(|(line, r)| {
            let environment = field_id(&r, line, 0, "environment")?;
            let random_score = field_f64(&r, line, 1, "random_score")?;
            let human_score = field_f64(&r, line, 2, "human_score")?;
            Ok((
                environment,
                Baseline {
                    random_score,
                    human_score,
                },
            ))
        })
        .collect::<Result<Vec<_>, DataError>>()?;
    BaselineTable::new(entries)
}

pub fn parse_schema(text: &str) -> Result<Schema, DataError> {
    let schema: Schema =
        toml::from_str(text).map_err(|e| DataError::InvalidSchema(e.to_string()))?;
    schema.validate()?;
    Ok(schema)
}

pub fn parse_dataset<R1: Read, R2: Read>(
    run_log: R1,
    baselines: R2,
    schema: &str,
) -> Result<SweepDataset, IoError> {
    let schema = parse_schema(schema).map_err(|source| IoError::Data {
        file: "schema",
        source,
    })?;
    let baselines = parse_baselines(baselines).map_err(|source| IoError::Data {
        file: "baselines",
        source,
    })?;
    let rows = parse_run_log(run_log).map_err(|source| IoError::Data {
        file: "runs",
        source,
    })?;
    SweepDataset::from_rows(rows, baselines, schema).map_err(|source| IoError::Data {
        file: "runs",
        source,
    })
}

/// A synthetic design plus an optional `[study]` table.
pub fn parse_design(text: &str) -> Result<(PlantedDesign, Option<StudyPlan>), IoError> {
    let err = |message: String| IoError::Format {
        file: "design",
        message,
    };
    let mut table: toml::Table = toml::from_str(text).map_err(|e| err(e.to_string()))?;
    let study = table
        .remove("study")
        .map(|v| v.try_into::<StudyPlan>())
        .transpose()
        .map_err(|e| err(format!("[study]: {e}")))?;
    let design: PlantedDesign = toml::Value::Table(table)
        .try_into()
        .map_err(|e| err(e.to_string()))?;
    Ok((design, study))
}

pub fn write_run_log(records: &[RunRecord]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RUN_LOG_HEADER).expect("in-memory write");
    for r in records {
        w.write_record([
            r.agent.as_str(),
            &r.environment,
            &r.data_regime,
            &r.hyperparameter,
            &r.value,
            &r.seed.to_string(),
            &r.final_score.to_string(),
        ])
        .expect("in-memory write");
    }
    into_string(w)
}

pub fn write_baselines(baselines: &BaselineTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(BASELINE_HEADER).expect("in-memory write");
    for (env, b) in baselines.iter() {
        w.write_record([env, &b.random_score.to_string(), &b.human_score.to_string()])
            .expect("in-memory write");
    }
    into_string(w)
}

pub fn write_schema(schema: &Schema) -> String {
    toml::to_string(schema).expect("schema serializes")
}

pub(crate) fn into_string(w: csv::Writer<Vec<u8>>) -> String {
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

/// Location of one dataset on disk.
#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub runs: PathBuf,
    pub baselines: PathBuf,
    /// A path, or [`BUILTIN_ATARI`].
    pub schema: String,
}

impl DatasetPaths {
    /// `runs.csv`, `baselines.csv` and `schema.toml` inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            runs: dir.join("runs.csv"),
            baselines: dir.join("baselines.csv"),
            schema: dir.join("schema.toml").to_string_lossy().into_owned(),
        }
    }
}

/// Raw bytes of the three inputs.
#[derive(Debug, Clone)]
pub struct DatasetSources {
    pub runs: Vec<u8>,
    pub baselines: Vec<u8>,
    pub schema: String,
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    fs::read(path).map_err(|source| IoError::File {
        path: path.to_owned(),
        source,
    })
}

impl DatasetSources {
    pub fn read(paths: &DatasetPaths) -> Result<Self, IoError> {
        let schema = if paths.schema == BUILTIN_ATARI {
            ATARI_SCHEMA.to_owned()
        } else {
            let path = Path::new(&paths.schema);
            String::from_utf8(read_file(path)?).map_err(|e| IoError::Format {
                file: "schema",
                message: e.to_string(),
            })?
        };
        Ok(Self {
            runs: read_file(&paths.runs)?,
            baselines: read_file(&paths.baselines)?,
            schema,
        })
    }

    pub fn parse(&self) -> Result<SweepDataset, IoError> {
        parse_dataset(
            self.runs.as_slice(),
            self.baselines.as_slice(),
            &self.schema,
        )
    }
}

/// Writes `runs.csv`, `baselines.csv` and `schema.toml` into `dir`.
pub fn write_dataset(dataset: &SweepDataset, dir: &Path) -> Result<(), IoError> {
    write_file(&dir.join("runs.csv"), &write_run_log(dataset.records()))?;
    write_file(
        &dir.join("baselines.csv"),
        &write_baselines(dataset.baselines()),
    )?;
    write_file(&dir.join("schema.toml"), &write_schema(dataset.schema()))
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| IoError::File {
                path: parent.to_owned(),
                source,
            })?;
        }
    }
    fs::write(path, contents).map_err(|source| IoError::File {
        path: path.to_owned(),
        source,
    })
}

/// One-line summary of a parsed dataset.
pub fn describe(dataset: &SweepDataset) -> String {
    let mut s = format!("{} runs;", dataset.len());
    for axis in thc_core::data::Axis::ALL {
        let _ = write!(s, " {}: {},", axis.name(), dataset.present(axis).len());
    }
    let _ = write!(
        s,
        " hyper-parameters: {}",
        dataset.hyperparameters().count()
    );
    s
}
