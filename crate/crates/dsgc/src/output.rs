//! Result files. Everything is written to a temporary file in the target
//! directory and renamed into place, so readers never see partial output.

use std::io::Write;
use std::path::Path;

use dsgc_core::experiment::MetricsRecord;
use serde::Serialize;

use crate::{Error, Result};

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let io = |source| Error::Io { path: path.to_owned(), source };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(bytes).map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Serializes `rows` as CSV (header from the first row's field names).
pub fn write_csv<R: Serialize>(path: &Path, rows: impl IntoIterator<Item = R>) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io { path: path.to_owned(), source: e.into_error() })?;
    write_atomic(path, &bytes)
}

#[derive(Debug, Serialize)]
pub struct FoldRow {
    pub fold: usize,
    pub accuracy: f64,
}

#[derive(Debug, Serialize)]
pub struct TraceRow {
    pub fold: usize,
    pub epoch: usize,
    pub total: f64,
    pub supervised: f64,
    pub contrastive: Option<f64>,
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub folds: usize,
}

#[derive(Debug, Serialize, serde::Deserialize, PartialEq)]
pub struct SweepRow {
    pub config: String,
    pub fold: usize,
    pub accuracy: f64,
}

/// `folds.csv`, `loss_trace.csv` and `summary.json` of one run.
pub fn write_run(dir: &Path, record: &MetricsRecord) -> Result<()> {
    write_csv(&dir.join("folds.csv"), record.fold_accuracies.iter().enumerate().map(|(fold, &accuracy)| FoldRow { fold, accuracy }))?;
    write_csv(
        &dir.join("loss_trace.csv"),
        record.loss_traces.iter().enumerate().flat_map(|(fold, trace)| {
            trace.iter().map(move |e| TraceRow {
                fold,
                epoch: e.epoch,
                total: e.total,
                supervised: e.supervised,
                contrastive: e.contrastive,
            })
        }),
    )?;
    write_json(&dir.join("summary.json"), &Summary { mean: record.mean, std: record.std, folds: record.fold_accuracies.len() })
}

pub fn sweep_rows<'a>(records: impl IntoIterator<Item = (String, &'a MetricsRecord)>) -> Vec<SweepRow> {
    records
        .into_iter()
        .flat_map(|(config, r)| {
            r.fold_accuracies.iter().enumerate().map(move |(fold, &accuracy)| SweepRow { config: config.clone(), fold, accuracy })
        })
        .collect()
}
