//! On-disk form of a campaign.
//!
//! A run directory holds `config.json` (the [`RunConfig`] snapshot),
//! `records.csv` and `manifest.json`. Floats in the CSV are written with 17
//! significant digits, enough for every value to read back bit-for-bit.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::design_space::DesignPoint;
use crate::driver::{Dataset, Phase, RunConfig, RunRecord};
use crate::evaluators::Evaluation;

pub const CONFIG_FILE: &str = "config.json";
pub const RECORDS_FILE: &str = "records.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const ENGINE: &str = "lagbo";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Complete,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub engine: String,
    pub version: String,
    pub seed: u64,
    pub status: RunStatus,
    pub records: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Error)]
pub enum RunDirError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}, row {row}: {message}")]
    Row { path: PathBuf, row: u64, message: String },
    #[error("{path}: {message}")]
    Inconsistent { path: PathBuf, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunDirError + '_ {
    move |source| RunDirError::Io {
        path: path.to_owned(),
        source,
    }
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header of `records.csv` for a `d`-dimensional space.
pub fn records_header(d: usize) -> Vec<String> {
    let mut h = vec!["iteration".to_owned(), "phase".to_owned()];
    h.extend((1..=d).map(|i| format!("x_{i}")));
    h.extend(
        ["bv", "rsp_on", "fom", "valid", "lambda_used", "target_used"]
            .iter()
            .map(|s| s.to_string()),
    );
    h
}

/// Serializes the records as CSV. Output depends only on the records, so
/// equal datasets give byte-equal files.
pub fn write_records<W: io::Write>(ds: &Dataset, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(records_header(ds.config().space.len()))?;
    for r in ds.records() {
        let mut row = vec![r.iteration.to_string(), r.phase.as_str().to_owned()];
        row.extend(r.x.values().iter().map(|v| float(*v)));
        row.push(float(r.eval.bv));
        row.push(float(r.eval.rsp_on));
        row.push(float(r.eval.fom));
        row.push(r.eval.valid.to_string());
        row.push(float(r.lambda_used));
        row.push(r.target_used.map(float).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `ds` into `dir`, creating it if needed.
pub fn write_run_dir(dir: &Path, ds: &Dataset, status: RunStatus, error: Option<String>) -> Result<(), RunDirError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;

    let path = dir.join(CONFIG_FILE);
    let mut json = serde_json::to_string_pretty(ds.config()).expect("config serializes");
    json.push('\n');
    fs::write(&path, json).map_err(io_err(&path))?;

    let path = dir.join(RECORDS_FILE);
    let mut buf = Vec::new();
    write_records(ds, &mut buf).map_err(|e| RunDirError::Inconsistent {
        path: path.clone(),
        message: e.to_string(),
    })?;
    fs::write(&path, buf).map_err(io_err(&path))?;

    let manifest = Manifest {
        engine: ENGINE.to_owned(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
        seed: ds.seed(),
        status,
        records: ds.len(),
        error,
    };
    let path = dir.join(MANIFEST_FILE);
    let mut json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    json.push('\n');
    fs::write(&path, json).map_err(io_err(&path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, RunDirError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| RunDirError::Json {
        path: path.to_owned(),
        source,
    })
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, RunDirError> {
    read_json(&dir.join(MANIFEST_FILE))
}

/// Parses `records.csv` for a `d`-dimensional space. Row numbers in errors
/// count file lines from 1, header included.
pub fn read_records<R: io::Read>(reader: R, d: usize, path: &Path) -> Result<Vec<RunRecord>, RunDirError> {
    let row_err = |row: u64, message: String| RunDirError::Row {
        path: path.to_owned(),
        row,
        message,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let expected = records_header(d);
    let header = rdr.headers().map_err(|e| row_err(1, e.to_string()))?;
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(row_err(1, format!("expected header {}", expected.join(","))));
    }

    let mut out = Vec::new();
    for result in rdr.records() {
        let rec = result.map_err(|e| {
            let row = e.position().map_or(0, |p| p.line());
            row_err(row, e.to_string())
        })?;
        let row = rec.position().map_or(0, |p| p.line());
        if rec.len() != expected.len() {
            return Err(row_err(
                row,
                format!("expected {} fields, found {}", expected.len(), rec.len()),
            ));
        }
        let num = |i: usize| -> Result<f64, RunDirError> {
            rec[i]
                .parse::<f64>()
                .map_err(|_| row_err(row, format!("column {} is not a number: {:?}", expected[i], &rec[i])))
        };
        let iteration = rec[0]
            .parse::<usize>()
            .map_err(|_| row_err(row, format!("bad iteration {:?}", &rec[0])))?;
        let phase = match &rec[1] {
            "init" => Phase::Init,
            "bo" => Phase::Bo,
            other => return Err(row_err(row, format!("unknown phase {other:?}"))),
        };
        let x = (0..d).map(|i| num(2 + i)).collect::<Result<Vec<_>, _>>()?;
        let base = 2 + d;
        let valid = match &rec[base + 3] {
            "true" => true,
            "false" => false,
            other => return Err(row_err(row, format!("valid must be true or false, got {other:?}"))),
        };
        let target_used = match &rec[base + 5] {
            "" => None,
            _ => Some(num(base + 5)?),
        };
        out.push(RunRecord {
            iteration,
            phase,
            x: DesignPoint::new(x),
            eval: Evaluation {
                bv: num(base)?,
                rsp_on: num(base + 1)?,
                fom: num(base + 2)?,
                valid,
                wall_time: None,
            },
            lambda_used: num(base + 4)?,
            target_used,
        });
    }
    Ok(out)
}

/// Loads a run directory written by [`write_run_dir`].
pub fn read_run_dir(dir: &Path) -> Result<(Dataset, Manifest), RunDirError> {
    let config: RunConfig = read_json(&dir.join(CONFIG_FILE))?;
    let manifest = read_manifest(dir)?;
    let path = dir.join(RECORDS_FILE);
    let file = fs::File::open(&path).map_err(io_err(&path))?;
    let records = read_records(io::BufReader::new(file), config.space.len(), &path)?;
    if records.len() != manifest.records {
        return Err(RunDirError::Row {
            path,
            row: records.len() as u64 + 2,
            message: format!(
                "file ends after {} records but the manifest lists {}",
                records.len(),
                manifest.records
            ),
        });
    }
    let ds = Dataset::from_records(config, records).map_err(|e| RunDirError::Inconsistent { path, message: e.0 })?;
    Ok((ds, manifest))
}
