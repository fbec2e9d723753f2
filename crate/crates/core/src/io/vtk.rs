//! Legacy-ASCII VTK snapshots of the coupled state.
//!
//! Two files per snapshot: the reference-configuration file carries material
//! coordinates, the displacement vector field, the phase field, and per-cell
//! refinement levels; the deformed companion adds the displacement to the
//! coordinates and drops cells whose three nodes are all past phi = 0.8, so
//! fully broken material reads as an open crack in a viewer.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::mesh::TriMesh;

use super::IoError;

/// Phase value past which a cell covered entirely by broken nodes is dropped
/// from the deformed view.
const BROKEN_PHI: f64 = 0.8;

fn write_header(out: &mut impl Write, title: &str, n_points: usize) -> std::io::Result<()> {
    writeln!(out, "# vtk DataFile Version 3.0")?;
    writeln!(out, "{title}")?;
    writeln!(out, "ASCII")?;
    writeln!(out, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(out, "POINTS {n_points} double")
}

fn write_cells(out: &mut impl Write, cells: &[[usize; 3]]) -> std::io::Result<()> {
    writeln!(out, "CELLS {} {}", cells.len(), 4 * cells.len())?;
    for c in cells {
        writeln!(out, "3 {} {} {}", c[0], c[1], c[2])?;
    }
    writeln!(out, "CELL_TYPES {}", cells.len())?;
    for _ in cells {
        writeln!(out, "5")?;
    }
    Ok(())
}

fn write_point_data(out: &mut impl Write, u: &[f64], phi: &[f64]) -> std::io::Result<()> {
    writeln!(out, "POINT_DATA {}", phi.len())?;
    writeln!(out, "VECTORS displacement double")?;
    for n in 0..phi.len() {
        writeln!(out, "{} {} 0", u[2 * n], u[2 * n + 1])?;
    }
    writeln!(out, "SCALARS phi double 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for &p in phi {
        writeln!(out, "{}", p.clamp(0.0, 1.0))?;
    }
    Ok(())
}

fn write_cell_levels(out: &mut impl Write, levels: &[u32]) -> std::io::Result<()> {
    writeln!(out, "CELL_DATA {}", levels.len())?;
    writeln!(out, "SCALARS level int 1")?;
    writeln!(out, "LOOKUP_TABLE default")?;
    for &l in levels {
        writeln!(out, "{l}")?;
    }
    Ok(())
}

/// Reference-configuration snapshot: all cells, material coordinates.
pub fn write_vtk(
    path: &Path,
    mesh: &TriMesh,
    u: &[f64],
    phi: &[f64],
    title: &str,
) -> Result<(), IoError> {
    assert_eq!(u.len(), 2 * mesh.nodes.len());
    assert_eq!(phi.len(), mesh.nodes.len());
    let mut out = BufWriter::new(File::create(path)?);
    write_header(&mut out, title, mesh.nodes.len())?;
    for n in &mesh.nodes {
        writeln!(out, "{} {} 0", n.x[0], n.x[1])?;
    }
    let cells: Vec<[usize; 3]> = mesh.elements.iter().map(|e| e.nodes).collect();
    write_cells(&mut out, &cells)?;
    write_point_data(&mut out, u, phi)?;
    let levels: Vec<u32> = mesh.elements.iter().map(|e| e.level).collect();
    write_cell_levels(&mut out, &levels)?;
    out.flush()?;
    Ok(())
}

/// Deformed-configuration snapshot: coordinates are x + u and cells whose
/// nodes all exceed the broken threshold are omitted.
pub fn write_deformed_vtk(
    path: &Path,
    mesh: &TriMesh,
    u: &[f64],
    phi: &[f64],
    title: &str,
) -> Result<(), IoError> {
    assert_eq!(u.len(), 2 * mesh.nodes.len());
    assert_eq!(phi.len(), mesh.nodes.len());
    let mut out = BufWriter::new(File::create(path)?);
    write_header(&mut out, title, mesh.nodes.len())?;
    for (i, n) in mesh.nodes.iter().enumerate() {
        writeln!(out, "{} {} 0", n.x[0] + u[2 * i], n.x[1] + u[2 * i + 1])?;
    }
    let kept: Vec<&crate::mesh::Element> = mesh
        .elements
        .iter()
        .filter(|e| e.nodes.iter().any(|&n| phi[n] <= BROKEN_PHI))
        .collect();
    let cells: Vec<[usize; 3]> = kept.iter().map(|e| e.nodes).collect();
    write_cells(&mut out, &cells)?;
    write_point_data(&mut out, u, phi)?;
    let levels: Vec<u32> = kept.iter().map(|e| e.level).collect();
    write_cell_levels(&mut out, &levels)?;
    out.flush()?;
    Ok(())
}

/// Parsed snapshot contents. `points` are whatever configuration the file
/// stored; the z coordinate is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct VtkSnapshot {
    pub title: String,
    pub points: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 3]>,
    pub displacement: Vec<[f64; 2]>,
    pub phi: Vec<f64>,
    pub levels: Vec<u32>,
}

/// Reads files produced by [`write_vtk`]/[`write_deformed_vtk`]. Not a general
/// VTK parser: sections must appear in the order the writers emit them.
pub fn read_vtk(path: &Path) -> Result<VtkSnapshot, IoError> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let mut lines = text.lines().enumerate();
    let mut next = |what: &str| -> Result<(usize, &str), IoError> {
        lines
            .next()
            .map(|(i, l)| (i + 1, l))
            .ok_or_else(|| IoError::format(path, 0, format!("missing {what}")))
    };
    let fail = |line: usize, msg: String| IoError::Format {
        path: path.display().to_string(),
        line,
        message: msg,
    };

    let (i, version) = next("version line")?;
    if !version.starts_with("# vtk DataFile") {
        return Err(fail(i, format!("not a VTK file: '{version}'")));
    }
    let title = next("title")?.1.to_string();
    let (i, format) = next("format")?;
    if format != "ASCII" {
        return Err(fail(i, format!("expected ASCII, got '{format}'")));
    }
    let (i, dataset) = next("dataset")?;
    if dataset != "DATASET UNSTRUCTURED_GRID" {
        return Err(fail(i, format!("expected unstructured grid, got '{dataset}'")));
    }

    let count = |line: usize, l: &str, key: &str, field: usize| -> Result<usize, IoError> {
        let parts: Vec<&str> = l.split_whitespace().collect();
        if parts.first() != Some(&key) || parts.len() <= field {
            return Err(fail(line, format!("expected '{key}' section, got '{l}'")));
        }
        parts[field]
            .parse()
            .map_err(|e| fail(line, format!("bad {key} count: {e}")))
    };
    let floats = |line: usize, l: &str, n: usize| -> Result<Vec<f64>, IoError> {
        let vals: Result<Vec<f64>, _> = l.split_whitespace().map(str::parse).collect();
        match vals {
            Ok(v) if v.len() == n => Ok(v),
            _ => Err(fail(line, format!("expected {n} numbers, got '{l}'"))),
        }
    };

    let (i, l) = next("POINTS")?;
    let n_points = count(i, l, "POINTS", 1)?;
    let mut points = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let (i, l) = next("point")?;
        let v = floats(i, l, 3)?;
        points.push([v[0], v[1]]);
    }

    let (i, l) = next("CELLS")?;
    let n_cells = count(i, l, "CELLS", 1)?;
    let mut cells = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let (i, l) = next("cell")?;
        let parts: Result<Vec<usize>, _> = l.split_whitespace().map(str::parse).collect();
        match parts {
            Ok(p) if p.len() == 4 && p[0] == 3 => cells.push([p[1], p[2], p[3]]),
            _ => return Err(fail(i, format!("expected triangle cell, got '{l}'"))),
        }
    }
    let (i, l) = next("CELL_TYPES")?;
    if count(i, l, "CELL_TYPES", 1)? != n_cells {
        return Err(fail(i, "cell type count mismatch".to_string()));
    }
    for _ in 0..n_cells {
        let (i, l) = next("cell type")?;
        if l.trim() != "5" {
            return Err(fail(i, format!("expected cell type 5, got '{l}'")));
        }
    }

    let (i, l) = next("POINT_DATA")?;
    if count(i, l, "POINT_DATA", 1)? != n_points {
        return Err(fail(i, "point data count mismatch".to_string()));
    }
    let (i, l) = next("VECTORS")?;
    if !l.starts_with("VECTORS displacement") {
        return Err(fail(i, format!("expected displacement vectors, got '{l}'")));
    }
    let mut displacement = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let (i, l) = next("displacement")?;
        let v = floats(i, l, 3)?;
        displacement.push([v[0], v[1]]);
    }
    let (i, l) = next("SCALARS phi")?;
    if !l.starts_with("SCALARS phi") {
        return Err(fail(i, format!("expected phi scalars, got '{l}'")));
    }
    next("lookup table")?;
    let mut phi = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let (i, l) = next("phi")?;
        phi.push(floats(i, l, 1)?[0]);
    }

    let (i, l) = next("CELL_DATA")?;
    if count(i, l, "CELL_DATA", 1)? != n_cells {
        return Err(fail(i, "cell data count mismatch".to_string()));
    }
    let (i, l) = next("SCALARS level")?;
    if !l.starts_with("SCALARS level") {
        return Err(fail(i, format!("expected level scalars, got '{l}'")));
    }
    next("lookup table")?;
    let mut levels = Vec::with_capacity(n_cells);
    for _ in 0..n_cells {
        let (i, l) = next("level")?;
        levels.push(
            l.trim()
                .parse()
                .map_err(|e| fail(i, format!("bad level: {e}")))?,
        );
    }

    Ok(VtkSnapshot {
        title,
        points,
        cells,
        displacement,
        phi,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::unit_square_debug;

    fn fields(n: usize) -> (Vec<f64>, Vec<f64>) {
        let u: Vec<f64> = (0..2 * n).map(|i| 0.01 * i as f64 + 1.0 / 3.0).collect();
        let phi: Vec<f64> = (0..n).map(|i| i as f64 / n as f64).collect();
        (u, phi)
    }

    #[test]
    fn reference_snapshot_round_trips_exactly() {
        let mesh = unit_square_debug();
        let (u, phi) = fields(mesh.nodes.len());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.vtk");
        write_vtk(&path, &mesh, &u, &phi, "step 3").unwrap();
        let snap = read_vtk(&path).unwrap();
        assert_eq!(snap.title, "step 3");
        assert_eq!(snap.points.len(), mesh.nodes.len());
        for (p, n) in snap.points.iter().zip(&mesh.nodes) {
            assert_eq!(*p, n.x);
        }
        let cells: Vec<[usize; 3]> = mesh.elements.iter().map(|e| e.nodes).collect();
        assert_eq!(snap.cells, cells);
        for (i, d) in snap.displacement.iter().enumerate() {
            assert_eq!(*d, [u[2 * i], u[2 * i + 1]]);
        }
        assert_eq!(snap.phi, phi);
        let levels: Vec<u32> = mesh.elements.iter().map(|e| e.level).collect();
        assert_eq!(snap.levels, levels);
    }

    #[test]
    fn deformed_snapshot_moves_points_and_drops_broken_cells() {
        let mesh = unit_square_debug();
        let n = mesh.nodes.len();
        let u: Vec<f64> = (0..2 * n).map(|i| 0.1 * (i % 2) as f64).collect();
        // Nodes 1, 2, 3 broken: the element on that side disappears, the
        // element touching node 0 stays.
        let phi = vec![0.0, 0.95, 0.9, 0.99];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap_deformed.vtk");
        write_deformed_vtk(&path, &mesh, &u, &phi, "deformed").unwrap();
        let snap = read_vtk(&path).unwrap();
        for (p, node) in snap.points.iter().zip(&mesh.nodes) {
            assert_eq!(p[0], node.x[0]);
            assert_eq!(p[1], node.x[1] + 0.1);
        }
        let kept: Vec<[usize; 3]> = mesh
            .elements
            .iter()
            .filter(|e| e.nodes.contains(&0))
            .map(|e| e.nodes)
            .collect();
        assert_eq!(snap.cells, kept);
        assert_eq!(snap.levels.len(), kept.len());
        assert_eq!(snap.phi.len(), n);
    }

    #[test]
    fn written_phi_stays_inside_the_unit_interval() {
        let mesh = unit_square_debug();
        let u = vec![0.0; 8];
        let phi = vec![-1e-13, 0.5, 1.0 + 1e-13, 1.0];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.vtk");
        write_vtk(&path, &mesh, &u, &phi, "clamped").unwrap();
        let snap = read_vtk(&path).unwrap();
        for &p in &snap.phi {
            assert!((0.0..=1.0).contains(&p));
        }
    }

    #[test]
    fn foreign_file_is_rejected_with_a_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("junk.vtk");
        std::fs::write(&path, "not a vtk\nfile\n").unwrap();
        assert!(matches!(
            read_vtk(&path),
            Err(IoError::Format { line: 1, .. })
        ));
    }
}
