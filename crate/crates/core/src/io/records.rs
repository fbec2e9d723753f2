//! Full per-step run records as JSONL, plus an end-of-run summary JSON.
//!
//! The CSV keeps the columns the plots need; the records file keeps
//! everything a rerun comparison or a post-mortem needs. In deterministic
//! mode wall-clock fields are zeroed so reruns are byte-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::solver::StepRecord;

use super::IoError;

pub struct RecordWriter {
    out: BufWriter<File>,
    deterministic: bool,
}

impl RecordWriter {
    pub fn create(path: &Path, deterministic: bool) -> Result<Self, IoError> {
        Ok(RecordWriter {
            out: BufWriter::new(File::create(path)?),
            deterministic,
        })
    }

    pub fn append(&mut self, record: &StepRecord) -> Result<(), IoError> {
        let mut r = record.clone();
        if self.deterministic {
            r.wall_ms = 0;
        }
        writeln!(self.out, "{}", serde_json::to_string(&r)?)?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn read_records(path: &Path) -> Result<Vec<StepRecord>, IoError> {
    let reader = BufReader::new(File::open(path)?);
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        records.push(serde_json::from_str(&line)?);
    }
    Ok(records)
}

/// End-of-run digest. `stop` is `target_reached`, `full_fracture`, or
/// `error`; an aborted run keeps its partial CSV/records and leaves the
/// abort reason here.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub scenario: String,
    pub stop: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub steps: usize,
    pub peak_force_n_per_mm: f64,
    /// Reported displacement at which the reaction collapsed, when it did.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_displacement_mm: Option<f64>,
    pub final_displacement_mm: f64,
    pub final_elements: usize,
    /// Element size the refinement policy aims for, from h0 and the level cap.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine_size_target: Option<f64>,
    /// Shortest longest-edge actually present in the final mesh.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fine_size_achieved: Option<f64>,
    pub wall_ms_total: u64,
}

impl RunSummary {
    pub fn write(&self, path: &Path) -> Result<(), IoError> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{}", serde_json::to_string_pretty(self)?)?;
        out.flush()?;
        Ok(())
    }
}

pub fn read_summary(path: &Path) -> Result<RunSummary, IoError> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
