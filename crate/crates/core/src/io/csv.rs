//! Force-displacement history as CSV, one row per accepted load step.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::solver::StepRecord;

use super::IoError;

pub const CSV_HEADER: &str =
    "step,time_s,displacement_mm,force_N_per_mm,elements,strain_energy,surface_energy,dissipation";

/// Streaming writer; the header goes out on construction so a run that aborts
/// mid-way still leaves a parseable file.
pub struct CsvWriter {
    out: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path) -> Result<Self, IoError> {
        let mut out = BufWriter::new(File::create(path)?);
        writeln!(out, "{CSV_HEADER}")?;
        out.flush()?;
        Ok(CsvWriter { out })
    }

    pub fn append(&mut self, r: &StepRecord) -> Result<(), IoError> {
        writeln!(
            self.out,
            "{},{},{},{},{},{},{},{}",
            r.step,
            r.time_s,
            r.displacement_mm,
            r.force_n_per_mm,
            r.elements,
            r.strain_energy,
            r.surface_energy,
            r.dissipation
        )?;
        self.out.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub step: usize,
    pub time_s: f64,
    pub displacement_mm: f64,
    pub force_n_per_mm: f64,
    pub elements: usize,
    pub strain_energy: f64,
    pub surface_energy: f64,
    pub dissipation: f64,
}

pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>, IoError> {
    let reader = BufReader::new(File::open(path)?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if i == 0 {
            if line != CSV_HEADER {
                return Err(IoError::format(path, 1, format!("bad header '{line}'")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(IoError::format(
                path,
                i + 1,
                format!("expected 8 fields, got {}", fields.len()),
            ));
        }
        let num = |k: usize| -> Result<f64, IoError> {
            fields[k]
                .parse()
                .map_err(|e| IoError::format(path, i + 1, format!("field {k}: {e}")))
        };
        let int = |k: usize| -> Result<usize, IoError> {
            fields[k]
                .parse()
                .map_err(|e| IoError::format(path, i + 1, format!("field {k}: {e}")))
        };
        rows.push(CsvRow {
            step: int(0)?,
            time_s: num(1)?,
            displacement_mm: num(2)?,
            force_n_per_mm: num(3)?,
            elements: int(4)?,
            strain_energy: num(5)?,
            surface_energy: num(6)?,
            dissipation: num(7)?,
        });
    }
    Ok(rows)
}
