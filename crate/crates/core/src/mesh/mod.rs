//! T3 triangulations with edge topology, a bisection forest for multi-level
//! adaptive refinement/coarsening, and nodal field transfer across mesh
//! updates.
//!
//! A mesh is an immutable snapshot: adaptation operations return a new mesh
//! plus a [`TransferRecord`] describing where each node of the new mesh came
//! from. Boundary semantics live on nodes as tag sets; a boundary edge's tag
//! is the intersection of its endpoint tags, which makes corner nodes and
//! midpoint insertion work without special cases.

mod adapt;
mod generate;

pub use adapt::{coarsen, mark_for_refinement, odt_smooth, refine};
pub use generate::{
    central_crack_slab, double_edge_notch, holed_panel, interface_strip, rect_structured,
    unit_square_debug, HoleSpec,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum MeshError {
    #[error("degenerate geometry: {0}")]
    BadGeometry(String),
    #[error("non-conforming mesh: edge ({0}, {1}) has more than two supporting elements")]
    NonConforming(usize, usize),
    #[error("element {0} has non-positive area {1}")]
    NegativeArea(usize, f64),
    #[error("transfer record covers {record} nodes but {fields} field entries were given")]
    TransferSizeMismatch { record: usize, fields: usize },
    #[error("unknown node group '{0}'")]
    UnknownGroup(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    /// Material coordinates (mm).
    pub x: [f64; 2],
    /// Dirichlet/symmetry group labels. Corner nodes carry every side's tag.
    pub tags: BTreeSet<String>,
    /// Material region label; 0 is bulk.
    pub region_tag: u16,
}

impl Node {
    pub fn at(x: f64, y: f64) -> Self {
        Node { x: [x, y], tags: BTreeSet::new(), region_tag: 0 }
    }

    pub fn tagged(x: f64, y: f64, tags: &[&str]) -> Self {
        Node {
            x: [x, y],
            tags: tags.iter().map(|s| s.to_string()).collect(),
            region_tag: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Element {
    /// Counter-clockwise node triple.
    pub nodes: [usize; 3],
    /// Bisection depth in the refinement forest.
    pub level: u32,
    pub region_tag: u16,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Node pair, stored sorted.
    pub nodes: [usize; 2],
    /// Supporting elements: one for a boundary edge, two for an interior one.
    pub support: Vec<usize>,
    pub is_boundary: bool,
}

/// Geometric rule assigning region tags, re-evaluated for nodes and elements
/// created during refinement. `Inherit` keeps parent/endpoint tags, for
/// meshes loaded from files.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionMap {
    Inherit,
    VerticalBand { x0: f64, x1: f64, tag: u16 },
}

impl RegionMap {
    /// Tag at a point, or `None` when tags must be inherited.
    pub fn tag_at(&self, x: [f64; 2]) -> Option<u16> {
        match self {
            RegionMap::Inherit => None,
            RegionMap::VerticalBand { x0, x1, tag } => {
                Some(if x[0] >= *x0 && x[0] <= *x1 { *tag } else { 0 })
            }
        }
    }
}

/// One element of the bisection forest. Entries are never removed; pruned
/// entries (undone refinements) are tombstoned via `pruned`.
#[derive(Debug, Clone)]
struct TreeElem {
    nodes: [usize; 3],
    level: u32,
    region_tag: u16,
    children: Option<[usize; 2]>,
    /// Node inserted on this element's bisected edge.
    midpoint: Option<usize>,
    active: bool,
    pruned: bool,
}

#[derive(Debug, Clone, Default)]
struct Forest {
    tree: Vec<TreeElem>,
    /// Tree index of each active element, aligned with `TriMesh::elements`.
    active: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    pub nodes: Vec<Node>,
    pub elements: Vec<Element>,
    pub edges: Vec<Edge>,
    pub region: RegionMap,
    forest: Forest,
}

/// Where each node of a new mesh came from. Weights are non-negative and sum
/// to one per entry.
#[derive(Debug, Clone, PartialEq)]
pub enum NodeOrigin {
    Existing(usize),
    /// Midpoint-style interpolation on an old edge: `w * a + (1 - w) * b`.
    Edge { a: usize, b: usize, w: f64 },
    /// General convex combination; only produced when a bisection midpoint
    /// does not lie on any single old edge (possible on unstructured input).
    Blend(Vec<(usize, f64)>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferRecord {
    pub origins: Vec<NodeOrigin>,
    pub old_node_count: usize,
}

impl TransferRecord {
    pub fn identity(n: usize) -> Self {
        TransferRecord { origins: (0..n).map(NodeOrigin::Existing).collect(), old_node_count: n }
    }
}

/// A nodal field handed to [`transfer_fields`]. `stride` is the number of
/// components per node (2 for displacements); `clamp01` marks phase fields.
#[derive(Debug, Clone, Copy)]
pub struct FieldRef<'a> {
    pub data: &'a [f64],
    pub stride: usize,
    pub clamp01: bool,
}

impl TriMesh {
    /// Build a level-0 mesh from raw nodes and (CCW) elements and construct
    /// its edge topology.
    pub fn from_raw(
        nodes: Vec<Node>,
        elements: Vec<(usize, usize, usize)>,
        region: RegionMap,
    ) -> Result<Self, MeshError> {
        Self::from_leveled(
            nodes,
            elements.into_iter().map(|(a, b, c)| ([a, b, c], 0u32)).collect(),
            region,
        )
    }

    pub fn from_leveled(
        nodes: Vec<Node>,
        elements: Vec<([usize; 3], u32)>,
        region: RegionMap,
    ) -> Result<Self, MeshError> {
        let mut mesh = TriMesh {
            nodes,
            elements: Vec::with_capacity(elements.len()),
            edges: Vec::new(),
            region: region.clone(),
            forest: Forest::default(),
        };
        for (i, (nodes, level)) in elements.into_iter().enumerate() {
            let region_tag = region
                .tag_at(mesh.centroid_of(nodes))
                .unwrap_or(0);
            mesh.elements.push(Element { nodes, level, region_tag });
            mesh.forest.tree.push(TreeElem {
                nodes,
                level,
                region_tag,
                children: None,
                midpoint: None,
                active: true,
                pruned: false,
            });
            mesh.forest.active.push(i);
            let a = mesh.signed_area(i);
            if a <= 0.0 {
                return Err(MeshError::NegativeArea(i, a));
            }
        }
        mesh.edges = build_edge_topology(&mesh)?;
        Ok(mesh)
    }

    /// Overrides per-element region tags, e.g. when loading a mesh whose tags
    /// were assigned by an unknown region map. Keeps the bisection forest in
    /// sync so later refinements inherit the stored tags.
    pub(crate) fn set_region_tags(&mut self, tags: &[u16]) -> Result<(), MeshError> {
        if tags.len() != self.elements.len() {
            return Err(MeshError::BadGeometry(format!(
                "{} region tags for {} elements",
                tags.len(),
                self.elements.len()
            )));
        }
        for (i, &tag) in tags.iter().enumerate() {
            self.elements[i].region_tag = tag;
            let t = self.forest.active[i];
            self.forest.tree[t].region_tag = tag;
        }
        Ok(())
    }

    fn centroid_of(&self, nodes: [usize; 3]) -> [f64; 2] {
        let mut c = [0.0; 2];
        for n in nodes {
            c[0] += self.nodes[n].x[0] / 3.0;
            c[1] += self.nodes[n].x[1] / 3.0;
        }
        c
    }

    pub fn signed_area(&self, elem: usize) -> f64 {
        let [a, b, c] = self.elements[elem].nodes;
        signed_area_of(self.nodes[a].x, self.nodes[b].x, self.nodes[c].x)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.elements.len()).map(|e| self.signed_area(e)).sum()
    }

    /// Smallest interior angle over all elements, in degrees.
    pub fn min_angle_deg(&self) -> f64 {
        let mut min = f64::INFINITY;
        for e in &self.elements {
            for i in 0..3 {
                let p = self.nodes[e.nodes[i]].x;
                let q = self.nodes[e.nodes[(i + 1) % 3]].x;
                let r = self.nodes[e.nodes[(i + 2) % 3]].x;
                let u = [q[0] - p[0], q[1] - p[1]];
                let v = [r[0] - p[0], r[1] - p[1]];
                let dot = u[0] * v[0] + u[1] * v[1];
                let nu = (u[0] * u[0] + u[1] * u[1]).sqrt();
                let nv = (v[0] * v[0] + v[1] * v[1]).sqrt();
                min = min.min((dot / (nu * nv)).clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        min
    }

    /// Nodes carrying the given boundary tag, ascending.
    pub fn group_nodes(&self, tag: &str) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].tags.contains(tag)).collect()
    }

    /// All boundary tags present, with member counts.
    pub fn boundary_groups(&self) -> BTreeMap<String, usize> {
        let mut groups = BTreeMap::new();
        for n in &self.nodes {
            for t in &n.tags {
                *groups.entry(t.clone()).or_insert(0) += 1;
            }
        }
        groups
    }

    /// Nodes lying on any boundary edge.
    pub fn boundary_nodes(&self) -> Vec<bool> {
        let mut on = vec![false; self.nodes.len()];
        for e in &self.edges {
            if e.is_boundary {
                on[e.nodes[0]] = true;
                on[e.nodes[1]] = true;
            }
        }
        on
    }

    /// Per-element histogram of refinement levels.
    pub fn level_histogram(&self) -> BTreeMap<u32, usize> {
        let mut h = BTreeMap::new();
        for e in &self.elements {
            *h.entry(e.level).or_insert(0) += 1;
        }
        h
    }

    fn forest(&self) -> &Forest {
        &self.forest
    }

    fn forest_mut(&mut self) -> &mut Forest {
        &mut self.forest
    }
}

pub fn signed_area_of(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// Build the edge list of the active elements: every element contributes its
/// three sides, shared sides merge into interior edges. Deterministic order,
/// sorted by node pair.
pub fn build_edge_topology(mesh: &TriMesh) -> Result<Vec<Edge>, MeshError> {
    let mut map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (ei, elem) in mesh.elements.iter().enumerate() {
        for k in 0..3 {
            let a = elem.nodes[k];
            let b = elem.nodes[(k + 1) % 3];
            let key = (a.min(b), a.max(b));
            map.entry(key).or_default().push(ei);
        }
    }
    let mut keys: Vec<(usize, usize)> = map.keys().copied().collect();
    keys.sort_unstable();
    let mut edges = Vec::with_capacity(keys.len());
    for key in keys {
        let support = map.remove(&key).unwrap();
        if support.len() > 2 {
            return Err(MeshError::NonConforming(key.0, key.1));
        }
        let is_boundary = support.len() == 1;
        edges.push(Edge { nodes: [key.0, key.1], support, is_boundary });
    }
    Ok(edges)
}

/// Interpolate nodal fields onto the new mesh described by `record`.
/// Surviving nodes copy exactly; midpoint nodes interpolate linearly; fields
/// marked `clamp01` (phase fields) are clamped to [0, 1] afterwards.
pub fn transfer_fields(
    record: &TransferRecord,
    fields: &[FieldRef<'_>],
) -> Result<Vec<Vec<f64>>, MeshError> {
    let mut out = Vec::with_capacity(fields.len());
    for field in fields {
        if field.data.len() != record.old_node_count * field.stride {
            return Err(MeshError::TransferSizeMismatch {
                record: record.old_node_count,
                fields: field.data.len() / field.stride.max(1),
            });
        }
        let mut values = vec![0.0; record.origins.len() * field.stride];
        for (ni, origin) in record.origins.iter().enumerate() {
            for c in 0..field.stride {
                let v = match origin {
                    NodeOrigin::Existing(old) => field.data[old * field.stride + c],
                    NodeOrigin::Edge { a, b, w } => {
                        w * field.data[a * field.stride + c]
                            + (1.0 - w) * field.data[b * field.stride + c]
                    }
                    NodeOrigin::Blend(parts) => parts
                        .iter()
                        .map(|(old, w)| w * field.data[old * field.stride + c])
                        .sum(),
                };
                values[ni * field.stride + c] = if field.clamp01 { v.clamp(0.0, 1.0) } else { v };
            }
        }
        out.push(values);
    }
    Ok(out)
}
