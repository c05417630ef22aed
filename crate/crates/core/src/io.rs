//! Reading cohorts and writing reports.
//!
//! A cohort is a CSV file with a header row plus a TOML schema sidecar:
//!
//! ```toml
//! numerical = ["age", "bili"]
//! time = "time"               # optional survival columns
//! event = "status"
//! event_values = ["2"]        # tokens meaning "event observed" (default "1")
//! arm = "trt"                 # optional allocation column
//! arm_labels = ["1", "2"]     # arm 0, arm 1, … (default: sorted distinct values)
//! id = "id"                   # optional; row numbers otherwise
//!
//! [[categorical]]
//! name = "sex"
//! labels = ["f", "m"]
//! ```
//!
//! Categorical entries may also be written inline as `"sex:f,m"`.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cohort::{Assignment, Cohort, Covariate, CovariateSchema, Patient};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CategoricalSpec {
    Table { name: String, labels: Vec<String> },
    Inline(String),
}

impl CategoricalSpec {
    fn resolve(&self) -> Result<(String, Vec<String>)> {
        match self {
            CategoricalSpec::Table { name, labels } => Ok((name.clone(), labels.clone())),
            CategoricalSpec::Inline(s) => {
                let (name, labels) = s.split_once(':').ok_or_else(|| {
                    Error::Schema(format!(
                        "categorical entry `{s}` must look like `name:a,b,c`"
                    ))
                })?;
                let labels = labels.split(',').map(|l| l.trim().to_string()).collect();
                Ok((name.trim().to_string(), labels))
            }
        }
    }
}

/// Column mapping between a CSV file and a [`CovariateSchema`].
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaFile {
    #[serde(default)]
    pub numerical: Vec<String>,
    #[serde(default)]
    pub categorical: Vec<CategoricalSpec>,
    pub time: Option<String>,
    pub event: Option<String>,
    pub event_values: Option<Vec<String>>,
    pub arm: Option<String>,
    pub arm_labels: Option<Vec<String>>,
    pub id: Option<String>,
}

impl SchemaFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Schema(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("schema serializes")
    }

    fn event_values(&self) -> Vec<String> {
        self.event_values
            .clone()
            .unwrap_or_else(|| vec!["1".into()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IngestionConfig {
    pub csv_path: PathBuf,
    pub schema_path: PathBuf,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
    #[serde(default = "default_missing")]
    pub missing_tokens: Vec<String>,
    /// Drop rows with missing values instead of failing.
    #[serde(default)]
    pub drop_incomplete: bool,
}

fn default_delimiter() -> char {
    ','
}

fn default_missing() -> Vec<String> {
    vec![String::new(), "NA".into()]
}

impl IngestionConfig {
    pub fn new(csv_path: impl Into<PathBuf>, schema_path: impl Into<PathBuf>) -> Self {
        IngestionConfig {
            csv_path: csv_path.into(),
            schema_path: schema_path.into(),
            delimiter: default_delimiter(),
            missing_tokens: default_missing(),
            drop_incomplete: false,
        }
    }
}

/// A cohort plus what was left out while reading it.
#[derive(Debug, Clone)]
pub struct LoadedCohort {
    pub cohort: Cohort,
    /// CSV line numbers (header is line 1) of rows dropped as incomplete.
    pub dropped_lines: Vec<u64>,
}

pub fn load_cohort(config: &IngestionConfig) -> Result<LoadedCohort> {
    let schema = SchemaFile::read(&config.schema_path)?;
    let text = fs::read_to_string(&config.csv_path).map_err(|e| Error::io(&config.csv_path, e))?;
    parse_cohort(&text, &schema, config)
}

/// Like [`load_cohort`], for CSV text already in memory.
pub fn parse_cohort(
    text: &str,
    schema: &SchemaFile,
    config: &IngestionConfig,
) -> Result<LoadedCohort> {
    if !config.delimiter.is_ascii() {
        return Err(Error::Config(
            "the delimiter must be an ASCII character".into(),
        ));
    }
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(config.delimiter as u8)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Data(format!("reading header: {e}")))?
        .clone();
    let column = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("column `{name}` is not in the CSV header")))
    };

    let categorical = schema
        .categorical
        .iter()
        .map(CategoricalSpec::resolve)
        .collect::<Result<Vec<_>>>()?;
    let num_cols = schema
        .numerical
        .iter()
        .map(|n| column(n))
        .collect::<Result<Vec<_>>>()?;
    let cat_cols = categorical
        .iter()
        .map(|(n, _)| column(n))
        .collect::<Result<Vec<_>>>()?;
    let time_col = schema.time.as_deref().map(column).transpose()?;
    let event_col = schema.event.as_deref().map(column).transpose()?;
    let arm_col = schema.arm.as_deref().map(column).transpose()?;
    let id_col = schema.id.as_deref().map(column).transpose()?;
    if time_col.is_some() != event_col.is_some() {
        return Err(Error::Schema(
            "`time` and `event` must be given together".into(),
        ));
    }
    let mut in_scope: Vec<usize> = num_cols.iter().chain(&cat_cols).copied().collect();
    in_scope.extend(
        time_col
            .iter()
            .chain(&event_col)
            .chain(&arm_col)
            .chain(&id_col),
    );

    let mut covariates: Vec<Covariate> =
        schema.numerical.iter().map(Covariate::numerical).collect();
    covariates.extend(
        categorical
            .iter()
            .map(|(n, l)| Covariate::categorical(n, l.iter())),
    );
    let cov_schema = CovariateSchema::new(
        covariates,
        schema.time.clone(),
        schema.event.clone(),
        schema.arm.clone(),
    )?;

    let mut rows = Vec::new();
    let mut incomplete = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Data(format!("reading CSV: {e}")))?;
        let line = record.position().map_or(0, |p| p.line());
        let missing = in_scope.iter().any(|&c| {
            config
                .missing_tokens
                .iter()
                .any(|t| record.get(c) == Some(t.as_str()))
        });
        if missing {
            incomplete.push(line);
        } else {
            rows.push((line, record));
        }
    }
    if !incomplete.is_empty() {
        if !config.drop_incomplete {
            return Err(Error::Data(format!(
                "{} with missing values ({}); pass --drop-incomplete to skip them",
                rows_word(incomplete.len()),
                join(&incomplete)
            )));
        }
        log::warn!(
            "dropped {} with missing values ({})",
            rows_word(incomplete.len()),
            join(&incomplete)
        );
    }
    if rows.is_empty() {
        return Err(Error::Data("no complete rows left in the CSV".into()));
    }

    let arm_labels = match (&arm_col, &schema.arm_labels) {
        (Some(_), Some(labels)) => labels.clone(),
        (Some(c), None) => rows
            .iter()
            .map(|(_, r)| r[*c].to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
        (None, _) => Vec::new(),
    };
    let event_values = schema.event_values();

    let mut patients = Vec::with_capacity(rows.len());
    for (line, r) in &rows {
        let at = |name: &str| format!("line {line}, column `{name}`");
        let numerical = num_cols
            .iter()
            .zip(&schema.numerical)
            .map(|(&c, name)| {
                r[c].parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| {
                        Error::Data(format!("{}: `{}` is not a finite number", at(name), &r[c]))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let cats = cat_cols
            .iter()
            .zip(&categorical)
            .map(|(&c, (name, labels))| {
                labels.iter().position(|l| l == &r[c]).ok_or_else(|| {
                    Error::Data(format!("{}: unknown category `{}`", at(name), &r[c]))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let id = id_col.map_or_else(|| format!("row{line}"), |c| r[c].to_string());
        let mut patient = Patient::new(id, numerical, cats);
        if let (Some(tc), Some(ec)) = (time_col, event_col) {
            let name = schema.time.as_deref().unwrap_or_default();
            let time = r[tc]
                .parse::<f64>()
                .map_err(|_| Error::Data(format!("{}: `{}` is not a number", at(name), &r[tc])))?;
            patient = patient.with_survival(time, event_values.iter().any(|v| v == &r[ec]));
        }
        if let Some(c) = arm_col {
            let arm = arm_labels.iter().position(|l| l == &r[c]).ok_or_else(|| {
                Error::Data(format!(
                    "{}: unknown arm label `{}`",
                    at(schema.arm.as_deref().unwrap_or_default()),
                    &r[c]
                ))
            })?;
            patient = patient.with_arm(arm);
        }
        patients.push(patient);
    }
    Ok(LoadedCohort {
        cohort: Cohort::new(cov_schema, patients)?,
        dropped_lines: incomplete,
    })
}

fn rows_word(count: usize) -> String {
    if count == 1 {
        "1 row".into()
    } else {
        format!("{count} rows")
    }
}

fn join(lines: &[u64]) -> String {
    let shown: Vec<String> = lines.iter().take(20).map(u64::to_string).collect();
    let more = if lines.len() > 20 { ", …" } else { "" };
    let word = if lines.len() == 1 { "line" } else { "lines" };
    format!("{word} {}{more}", shown.join(", "))
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types serialize");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json(value).as_bytes())
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

fn csv_err(e: impl std::fmt::Display) -> Error {
    Error::Data(format!("CSV: {e}"))
}

#[derive(Debug, Serialize, Deserialize)]
struct AssignmentRow {
    #[serde(rename = "patientId")]
    patient_id: String,
    arm: usize,
}

/// `patientId,arm` rows in cohort order.
pub fn assignment_csv(cohort: &Cohort, assignment: &Assignment) -> Result<Vec<u8>> {
    if assignment.len() != cohort.len() {
        return Err(Error::LengthMismatch {
            expected: cohort.len(),
            actual: assignment.len(),
        });
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    for (p, &arm) in cohort.patients().iter().zip(assignment.arm_of()) {
        w.serialize(AssignmentRow {
            patient_id: p.id.clone(),
            arm,
        })
        .map_err(csv_err)?;
    }
    w.into_inner().map_err(csv_err)
}

/// Reads an assignment CSV; rows may come in any order but must cover every
/// patient exactly once.
pub fn parse_assignment_csv(text: &str, cohort: &Cohort) -> Result<Assignment> {
    let index: HashMap<&str, usize> = cohort
        .patients()
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.as_str(), i))
        .collect();
    let mut arm_of: Vec<Option<usize>> = vec![None; cohort.len()];
    for row in csv::Reader::from_reader(text.as_bytes()).deserialize() {
        let row: AssignmentRow = row.map_err(csv_err)?;
        let &i = index.get(row.patient_id.as_str()).ok_or_else(|| {
            Error::Data(format!(
                "assignment names unknown patient `{}`",
                row.patient_id
            ))
        })?;
        if arm_of[i].replace(row.arm).is_some() {
            return Err(Error::Data(format!(
                "patient `{}` is assigned twice",
                row.patient_id
            )));
        }
    }
    let arm_of = arm_of
        .into_iter()
        .enumerate()
        .map(|(i, a)| {
            a.ok_or_else(|| {
                Error::Data(format!("patient `{}` has no arm", cohort.patients()[i].id))
            })
        })
        .collect::<Result<_>>()?;
    Ok(Assignment::new(arm_of))
}

pub fn read_assignment_csv(path: &Path, cohort: &Cohort) -> Result<Assignment> {
    parse_assignment_csv(
        &fs::read_to_string(path).map_err(|e| Error::io(path, e))?,
        cohort,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub n: usize,
    pub solver: String,
    pub objective: f64,
    #[serde(rename = "baselineMean")]
    pub baseline_mean: f64,
    #[serde(rename = "wallTimeMs")]
    pub wall_time_ms: f64,
    pub seed: u64,
}

pub fn benchmark_csv(rows: &[BenchmarkRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record([
            "n",
            "solver",
            "objective",
            "baselineMean",
            "wallTimeMs",
            "seed",
        ])
        .map_err(csv_err)?;
    }
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.into_inner().map_err(csv_err)
}

pub fn parse_benchmark_csv(text: &str) -> Result<Vec<BenchmarkRow>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .map(|r| r.map_err(csv_err))
        .collect()
}

/// Hex SHA-256 of the cohort and the run configuration, both as canonical JSON.
pub fn instance_digest<C: Serialize>(cohort: &Cohort, config: &C) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(cohort).expect("cohort serializes"));
    h.update([0u8]);
    h.update(serde_json::to_vec(config).expect("config serializes"));
    hex::encode(h.finalize())
}
