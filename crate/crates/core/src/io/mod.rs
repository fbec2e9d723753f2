//! File formats: VTK snapshots, a plain-text mesh exchange format, the
//! force-displacement CSV, and JSONL run records.
//!
//! All writers format floats with Rust's shortest round-trip notation, so a
//! write/read cycle reproduces every value bit for bit and byte-identical
//! reruns stay byte-identical.

mod csv;
mod meshio;
mod records;
mod vtk;

pub use csv::{read_csv, CsvRow, CsvWriter, CSV_HEADER};
pub use meshio::{read_mesh, write_mesh};
pub use records::{read_records, read_summary, RecordWriter, RunSummary};
pub use vtk::{read_vtk, write_deformed_vtk, write_vtk, VtkSnapshot};

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error(transparent)]
    Mesh(#[from] crate::mesh::MeshError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl IoError {
    fn format(path: &std::path::Path, line: usize, message: impl Into<String>) -> Self {
        IoError::Format {
            path: path.display().to_string(),
            line,
            message: message.into(),
        }
    }
}
