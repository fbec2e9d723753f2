//! Plain-text mesh exchange format.
//!
//! ```text
//! nodes N elements M
//! <N lines>  id x y boundary_tags region_tag
//! <M lines>  id n1 n2 n3 level region_tag
//! ```
//!
//! Boundary tags are '+'-joined group names, '-' when the node has none.
//! Region tags written here survive a read exactly; meshes loaded from files
//! use the inherit rule for tags of nodes created by later refinement.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::mesh::{Node, RegionMap, TriMesh};

use super::IoError;

pub fn write_mesh(path: &Path, mesh: &TriMesh) -> Result<(), IoError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(
        out,
        "nodes {} elements {}",
        mesh.nodes.len(),
        mesh.elements.len()
    )?;
    for (i, n) in mesh.nodes.iter().enumerate() {
        let tags = if n.tags.is_empty() {
            "-".to_string()
        } else {
            n.tags.iter().cloned().collect::<Vec<_>>().join("+")
        };
        writeln!(out, "{} {} {} {} {}", i, n.x[0], n.x[1], tags, n.region_tag)?;
    }
    for (i, e) in mesh.elements.iter().enumerate() {
        writeln!(
            out,
            "{} {} {} {} {} {}",
            i, e.nodes[0], e.nodes[1], e.nodes[2], e.level, e.region_tag
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_mesh(path: &Path) -> Result<TriMesh, IoError> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());

    let (i, header) = lines
        .next()
        .ok_or_else(|| IoError::format(path, 0, "empty file"))?;
    let h: Vec<&str> = header.split_whitespace().collect();
    if h.len() != 4 || h[0] != "nodes" || h[2] != "elements" {
        return Err(IoError::format(
            path,
            i + 1,
            format!("expected 'nodes N elements M', got '{header}'"),
        ));
    }
    let n_nodes: usize = h[1]
        .parse()
        .map_err(|e| IoError::format(path, i + 1, format!("bad node count: {e}")))?;
    let n_elems: usize = h[3]
        .parse()
        .map_err(|e| IoError::format(path, i + 1, format!("bad element count: {e}")))?;

    let mut nodes = Vec::with_capacity(n_nodes);
    for k in 0..n_nodes {
        let (i, line) = lines
            .next()
            .ok_or_else(|| IoError::format(path, 0, format!("missing node {k}")))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(IoError::format(path, i + 1, "node line needs 5 fields"));
        }
        let id: usize = f[0]
            .parse()
            .map_err(|e| IoError::format(path, i + 1, format!("bad node id: {e}")))?;
        if id != k {
            return Err(IoError::format(
                path,
                i + 1,
                format!("node ids must be sequential: expected {k}, got {id}"),
            ));
        }
        let x: f64 = f[1]
            .parse()
            .map_err(|e| IoError::format(path, i + 1, format!("bad x: {e}")))?;
        let y: f64 = f[2]
            .parse()
            .map_err(|e| IoError::format(path, i + 1, format!("bad y: {e}")))?;
        let tags: BTreeSet<String> = if f[3] == "-" {
            BTreeSet::new()
        } else {
            f[3].split('+').map(str::to_string).collect()
        };
        let region_tag: u16 = f[4]
            .parse()
            .map_err(|e| IoError::format(path, i + 1, format!("bad region tag: {e}")))?;
        nodes.push(Node {
            x: [x, y],
            tags,
            region_tag,
        });
    }

    let mut elements = Vec::with_capacity(n_elems);
    let mut region_tags = Vec::with_capacity(n_elems);
    for k in 0..n_elems {
        let (i, line) = lines
            .next()
            .ok_or_else(|| IoError::format(path, 0, format!("missing element {k}")))?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(IoError::format(path, i + 1, "element line needs 6 fields"));
        }
        let parse_idx = |s: &str, what: &str| -> Result<usize, IoError> {
            s.parse()
                .map_err(|e| IoError::format(path, i + 1, format!("bad {what}: {e}")))
        };
        let id = parse_idx(f[0], "element id")?;
        if id != k {
            return Err(IoError::format(
                path,
                i + 1,
                format!("element ids must be sequential: expected {k}, got {id}"),
            ));
        }
        let conn = [
            parse_idx(f[1], "node index")?,
            parse_idx(f[2], "node index")?,
            parse_idx(f[3], "node index")?,
        ];
        for &n in &conn {
            if n >= n_nodes {
                return Err(IoError::format(
                    path,
                    i + 1,
                    format!("node index {n} out of range ({n_nodes} nodes)"),
                ));
            }
        }
        let level: u32 = f[4]
            .parse()
            .map_err(|e| IoError::format(path, i + 1, format!("bad level: {e}")))?;
        let region_tag: u16 = f[5]
            .parse()
            .map_err(|e| IoError::format(path, i + 1, format!("bad region tag: {e}")))?;
        elements.push((conn, level));
        region_tags.push(region_tag);
    }

    if let Some((i, line)) = lines.next() {
        return Err(IoError::format(
            path,
            i + 1,
            format!("trailing content: '{line}'"),
        ));
    }

    let mut mesh = TriMesh::from_leveled(nodes, elements, RegionMap::Inherit)?;
    mesh.set_region_tags(&region_tags)?;
    Ok(mesh)
}
