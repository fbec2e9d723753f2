//! Adaptive refinement (longest-edge bisection with propagation), sibling
//! coarsening, and optimal-Delaunay node smoothing.
//!
//! Refinement bisects marked elements through their longest edge. To stay
//! conforming, the split propagates along the longest-edge path until it
//! reaches a terminal pair (two elements sharing each other's longest edge)
//! or a boundary edge; terminal elements are bisected through the shared
//! midpoint. Edge "length" is a total order (squared length, then node ids)
//! so ties resolve identically from both sides and chains cannot cycle.

use std::collections::{BTreeMap, HashMap, HashSet};

use super::{
    build_edge_topology, signed_area_of, MeshError, Node, NodeOrigin, TransferRecord, TreeElem,
    TriMesh,
};

/// Active elements whose nodal phase field reaches `threshold` and whose
/// level is still below the cap.
pub fn mark_for_refinement(mesh: &TriMesh, phi: &[f64], threshold: f64, r_l: u32) -> Vec<usize> {
    (0..mesh.elements.len())
        .filter(|&e| {
            let elem = &mesh.elements[e];
            elem.level < r_l && elem.nodes.iter().any(|&n| phi[n] >= threshold)
        })
        .collect()
}

type SideKey = (u64, usize, usize);

struct Adaptor {
    mesh: TriMesh,
    /// Current sides of active elements -> supporting tree indices.
    edge_map: HashMap<(usize, usize), Vec<usize>>,
    /// Midpoints already inserted this pass, keyed by the split side.
    midpoints: HashMap<(usize, usize), usize>,
    /// Provenance of every node in terms of pre-pass node ids.
    origins: Vec<NodeOrigin>,
    bisections: usize,
}

impl Adaptor {
    fn new(mesh: &TriMesh) -> Self {
        let mesh = mesh.clone();
        let mut edge_map: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (slot, &t) in mesh.forest().active.iter().enumerate() {
            debug_assert_eq!(mesh.forest().tree[t].nodes, mesh.elements[slot].nodes);
            for k in 0..3 {
                let a = mesh.forest().tree[t].nodes[k];
                let b = mesh.forest().tree[t].nodes[(k + 1) % 3];
                edge_map.entry(sorted(a, b)).or_default().push(t);
            }
        }
        let origins = (0..mesh.nodes.len()).map(NodeOrigin::Existing).collect();
        Adaptor { mesh, edge_map, midpoints: HashMap::new(), origins, bisections: 0 }
    }

    fn tree(&self, t: usize) -> &TreeElem {
        &self.mesh.forest().tree[t]
    }

    fn side_key(&self, a: usize, b: usize) -> SideKey {
        let pa = self.mesh.nodes[a].x;
        let pb = self.mesh.nodes[b].x;
        let dx = pa[0] - pb[0];
        let dy = pa[1] - pb[1];
        let len2 = dx * dx + dy * dy;
        (len2.to_bits(), a.min(b), a.max(b))
    }

    /// Longest side of an active tree element, as an ordered side (s0, s1)
    /// with s2 the opposite node, preserving orientation.
    fn longest_side(&self, t: usize) -> ([usize; 3], SideKey) {
        let n = self.tree(t).nodes;
        let mut best = 0;
        let mut best_key = self.side_key(n[0], n[1]);
        for k in 1..3 {
            let key = self.side_key(n[k], n[(k + 1) % 3]);
            if key > best_key {
                best = k;
                best_key = key;
            }
        }
        ([n[best], n[(best + 1) % 3], n[(best + 2) % 3]], best_key)
    }

    fn neighbor_across(&self, t: usize, a: usize, b: usize) -> Option<usize> {
        self.edge_map
            .get(&sorted(a, b))?
            .iter()
            .copied()
            .find(|&other| other != t)
    }

    /// Bisect `t` through its longest edge, propagating first until the split
    /// is conforming.
    fn lepp_refine(&mut self, t: usize) -> Result<(), MeshError> {
        let budget = 64 * (self.mesh.forest().tree.len() + 16);
        while self.tree(t).active {
            let mut chain = vec![t];
            loop {
                if self.bisections > budget {
                    return Err(MeshError::BadGeometry(
                        "longest-edge propagation did not terminate".into(),
                    ));
                }
                let cur = *chain.last().unwrap();
                let ([a, b, _], key) = self.longest_side(cur);
                match self.neighbor_across(cur, a, b) {
                    None => {
                        self.bisect(cur)?;
                        break;
                    }
                    Some(nb) => {
                        let (_, nb_key) = self.longest_side(nb);
                        if nb_key == key {
                            self.bisect(cur)?;
                            self.bisect(nb)?;
                            break;
                        }
                        chain.push(nb);
                    }
                }
            }
        }
        Ok(())
    }

    /// Split one active element through the midpoint of its longest edge.
    fn bisect(&mut self, t: usize) -> Result<(), MeshError> {
        debug_assert!(self.tree(t).active);
        self.bisections += 1;
        let ([s0, s1, s2], _) = self.longest_side(t);
        let m = self.midpoint_node(s0, s1);

        let level = self.tree(t).level + 1;
        let child_a = self.new_tree_elem([s0, m, s2], level, t);
        let child_b = self.new_tree_elem([m, s1, s2], level, t);

        let forest = self.mesh.forest_mut();
        forest.tree[t].active = false;
        forest.tree[t].children = Some([child_a, child_b]);
        forest.tree[t].midpoint = Some(m);

        for (x, y) in [(s0, s1), (s1, s2), (s2, s0)] {
            remove_support(&mut self.edge_map, sorted(x, y), t);
        }
        for (child, sides) in [
            (child_a, [(s0, m), (m, s2), (s2, s0)]),
            (child_b, [(m, s1), (s1, s2), (s2, m)]),
        ] {
            for (x, y) in sides {
                self.edge_map.entry(sorted(x, y)).or_default().push(child);
            }
        }
        Ok(())
    }

    fn new_tree_elem(&mut self, nodes: [usize; 3], level: u32, parent: usize) -> usize {
        let centroid = self.mesh.centroid_of(nodes);
        let region_tag = self
            .mesh
            .region
            .tag_at(centroid)
            .unwrap_or(self.tree(parent).region_tag);
        let forest = self.mesh.forest_mut();
        forest.tree.push(TreeElem {
            nodes,
            level,
            region_tag,
            children: None,
            midpoint: None,
            active: true,
            pruned: false,
        });
        forest.tree.len() - 1
    }

    /// Get or insert the midpoint node of side (a, b), tagging it from the
    /// endpoints when the side lies on the boundary and recording its
    /// provenance in pre-pass node ids.
    fn midpoint_node(&mut self, a: usize, b: usize) -> usize {
        let key = sorted(a, b);
        if let Some(&m) = self.midpoints.get(&key) {
            return m;
        }
        let pa = self.mesh.nodes[a].x;
        let pb = self.mesh.nodes[b].x;
        let x = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
        let is_boundary = self.edge_map.get(&key).map_or(true, |s| s.len() == 1);
        let tags = if is_boundary {
            self.mesh.nodes[a].tags.intersection(&self.mesh.nodes[b].tags).cloned().collect()
        } else {
            Default::default()
        };
        let region_tag = self.mesh.region.tag_at(x).unwrap_or_else(|| {
            let (ra, rb) = (self.mesh.nodes[a].region_tag, self.mesh.nodes[b].region_tag);
            if ra == rb {
                ra
            } else {
                0
            }
        });
        let m = self.mesh.nodes.len();
        self.mesh.nodes.push(Node { x, tags, region_tag });
        self.origins.push(combine_origins(&self.origins[a], &self.origins[b]));
        self.midpoints.insert(key, m);
        m
    }

    /// Refine the coarser element across any edge whose supports differ by
    /// more than one level, until the invariant holds.
    fn enforce_level_closure(&mut self) -> Result<(), MeshError> {
        loop {
            let mut to_refine: Vec<usize> = Vec::new();
            for supports in self.edge_map.values() {
                if let [t1, t2] = supports[..] {
                    let l1 = self.tree(t1).level;
                    let l2 = self.tree(t2).level;
                    if l1 + 1 < l2 {
                        to_refine.push(t1);
                    } else if l2 + 1 < l1 {
                        to_refine.push(t2);
                    }
                }
            }
            if to_refine.is_empty() {
                return Ok(());
            }
            to_refine.sort_unstable();
            to_refine.dedup();
            for t in to_refine {
                if self.tree(t).active {
                    self.lepp_refine(t)?;
                }
            }
        }
    }

    fn finish(mut self) -> Result<(TriMesh, TransferRecord), MeshError> {
        let old_node_count = self
            .origins
            .iter()
            .filter(|o| matches!(o, NodeOrigin::Existing(_)))
            .count();
        rebuild_active(&mut self.mesh)?;
        let record = TransferRecord { origins: self.origins, old_node_count };
        Ok((self.mesh, record))
    }
}

/// Bisect the marked active elements (indices into `mesh.elements`), apply
/// conformity propagation and the adjacent-level closure, and return the new
/// mesh with the node provenance record.
pub fn refine(mesh: &TriMesh, marked: &[usize]) -> Result<(TriMesh, TransferRecord), MeshError> {
    let mut ad = Adaptor::new(mesh);
    let targets: Vec<usize> = marked.iter().map(|&slot| mesh.forest().active[slot]).collect();
    for t in targets {
        if ad.tree(t).active {
            ad.lepp_refine(t)?;
        }
    }
    ad.enforce_level_closure()?;
    ad.finish()
}

/// Merge sibling leaf pairs whose nodes all satisfy `phi < threshold_low`,
/// when the merge keeps the mesh conforming (all pairs sharing the bisection
/// midpoint merge together) and the adjacent-level invariant survives.
pub fn coarsen(
    mesh: &TriMesh,
    phi: &[f64],
    threshold_low: f64,
) -> Result<(TriMesh, TransferRecord), MeshError> {
    let mut m = mesh.clone();

    // midpoint node -> parents bisected through it, and which are mergeable
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut candidate: HashMap<usize, bool> = HashMap::new();
    {
        let forest = m.forest();
        for (p, elem) in forest.tree.iter().enumerate() {
            if elem.pruned || elem.active {
                continue;
            }
            let Some([c1, c2]) = elem.children else { continue };
            let Some(mid) = elem.midpoint else { continue };
            if !forest.tree[c1].active || !forest.tree[c2].active {
                continue;
            }
            let low = |n: usize| phi[n] < threshold_low;
            let ok = elem.nodes.iter().all(|&n| low(n)) && low(mid);
            groups.entry(mid).or_default().push(p);
            candidate.insert(p, ok);
        }
    }

    // level check needs current neighbors of the would-be parent
    let mut edge_levels: HashMap<(usize, usize), Vec<(usize, u32)>> = HashMap::new();
    for (slot, elem) in m.elements.iter().enumerate() {
        let t = m.forest().active[slot];
        for k in 0..3 {
            let key = sorted(elem.nodes[k], elem.nodes[(k + 1) % 3]);
            edge_levels.entry(key).or_default().push((t, elem.level));
        }
    }

    // active elements referencing each midpoint (conformity check)
    let mut mid_users: HashMap<usize, Vec<usize>> = HashMap::new();
    for &mid in groups.keys() {
        mid_users.insert(mid, Vec::new());
    }
    for (slot, elem) in m.elements.iter().enumerate() {
        let t = m.forest().active[slot];
        for &n in &elem.nodes {
            if let Some(users) = mid_users.get_mut(&n) {
                users.push(t);
            }
        }
    }

    let mut merged_parents: Vec<usize> = Vec::new();
    'group: for (&mid, parents) in &groups {
        let mut group_children: HashSet<usize> = HashSet::new();
        for &p in parents {
            if !candidate.get(&p).copied().unwrap_or(false) {
                continue 'group;
            }
            let [c1, c2] = m.forest().tree[p].children.unwrap();
            group_children.insert(c1);
            group_children.insert(c2);
        }
        // the midpoint must disappear: every active user is a group child
        if !mid_users[&mid].iter().all(|u| group_children.contains(u)) {
            continue;
        }
        // merged parent at level L-1 may not sit next to level > L
        for &p in parents {
            let pe = &m.forest().tree[p];
            let max_neighbor_level = pe
                .nodes
                .iter()
                .zip(pe.nodes.iter().cycle().skip(1))
                .flat_map(|(&a, &b)| edge_levels.get(&sorted(a, b)).into_iter().flatten())
                .filter(|(t, _)| !group_children.contains(t))
                .map(|&(_, l)| l)
                .max();
            if let Some(l) = max_neighbor_level {
                if l > pe.level + 1 {
                    continue 'group;
                }
            }
        }
        merged_parents.extend(parents.iter().copied());
    }

    if merged_parents.is_empty() {
        let record = TransferRecord::identity(m.nodes.len());
        return Ok((m, record));
    }

    for p in merged_parents {
        let forest = m.forest_mut();
        let [c1, c2] = forest.tree[p].children.take().unwrap();
        forest.tree[p].midpoint = None;
        forest.tree[p].active = true;
        for c in [c1, c2] {
            forest.tree[c].active = false;
            forest.tree[c].pruned = true;
        }
    }

    // drop orphaned nodes and remap ids everywhere in the forest
    let mut referenced = vec![false; m.nodes.len()];
    for elem in m.forest().tree.iter().filter(|e| !e.pruned) {
        for &n in &elem.nodes {
            referenced[n] = true;
        }
        if let Some(mid) = elem.midpoint {
            referenced[mid] = true;
        }
    }
    let mut remap = vec![usize::MAX; m.nodes.len()];
    let mut kept_nodes = Vec::with_capacity(m.nodes.len());
    let mut origins = Vec::new();
    for (old, node) in m.nodes.iter().enumerate() {
        if referenced[old] {
            remap[old] = kept_nodes.len();
            kept_nodes.push(node.clone());
            origins.push(NodeOrigin::Existing(old));
        }
    }
    let old_node_count = m.nodes.len();
    m.nodes = kept_nodes;
    for elem in m.forest_mut().tree.iter_mut().filter(|e| !e.pruned) {
        for n in elem.nodes.iter_mut() {
            *n = remap[*n];
        }
        if let Some(mid) = elem.midpoint.as_mut() {
            *mid = remap[*mid];
        }
    }

    rebuild_active(&mut m)?;
    Ok((m, TransferRecord { origins, old_node_count }))
}

/// Move interior unprotected nodes to the area-weighted average of their
/// incident elements' circumcenters, rejecting moves that would invert any
/// incident element or worsen the smallest incident corner angle. Topology
/// is unchanged and the global minimum angle cannot degrade.
pub fn odt_smooth(mesh: &TriMesh, protected: &HashSet<usize>) -> TriMesh {
    let mut m = mesh.clone();
    let boundary = m.boundary_nodes();
    let mut incident: Vec<Vec<usize>> = vec![Vec::new(); m.nodes.len()];
    for (e, elem) in m.elements.iter().enumerate() {
        for &n in &elem.nodes {
            incident[n].push(e);
        }
    }
    let pre_min_angle = m.min_angle_deg();
    for n in 0..m.nodes.len() {
        if boundary[n] || protected.contains(&n) || incident[n].is_empty() {
            continue;
        }
        let mut weighted = [0.0; 2];
        let mut total = 0.0;
        let mut ok = true;
        for &e in &incident[n] {
            let [a, b, c] = m.elements[e].nodes;
            let area = signed_area_of(m.nodes[a].x, m.nodes[b].x, m.nodes[c].x);
            match circumcenter(m.nodes[a].x, m.nodes[b].x, m.nodes[c].x) {
                Some(cc) if area > 0.0 => {
                    weighted[0] += area * cc[0];
                    weighted[1] += area * cc[1];
                    total += area;
                }
                _ => ok = false,
            }
        }
        if !ok || total <= 0.0 {
            continue;
        }
        let target = [weighted[0] / total, weighted[1] / total];
        let old = m.nodes[n].x;
        let local_angle = |m: &TriMesh| {
            incident[n]
                .iter()
                .map(|&e| {
                    let [a, b, c] = m.elements[e].nodes;
                    min_corner_angle(m.nodes[a].x, m.nodes[b].x, m.nodes[c].x)
                })
                .fold(f64::INFINITY, f64::min)
        };
        let before = local_angle(&m);
        m.nodes[n].x = target;
        let inverted = incident[n].iter().any(|&e| {
            let [a, b, c] = m.elements[e].nodes;
            signed_area_of(m.nodes[a].x, m.nodes[b].x, m.nodes[c].x) <= f64::EPSILON
        });
        if inverted || local_angle(&m) < before - 1e-12 {
            m.nodes[n].x = old;
        }
    }
    debug_assert!(m.min_angle_deg() >= pre_min_angle - 1e-9);
    m
}

/// Smallest corner angle of a triangle, in radians.
fn min_corner_angle(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    let corner = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| {
        let u = [q[0] - p[0], q[1] - p[1]];
        let v = [r[0] - p[0], r[1] - p[1]];
        let dot = u[0] * v[0] + u[1] * v[1];
        let nu = u[0].hypot(u[1]);
        let nv = v[0].hypot(v[1]);
        (dot / (nu * nv)).clamp(-1.0, 1.0).acos()
    };
    corner(a, b, c).min(corner(b, c, a)).min(corner(c, a, b))
}

fn circumcenter(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Option<[f64; 2]> {
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    if d.abs() < 1e-300 {
        return None;
    }
    let a2 = a[0] * a[0] + a[1] * a[1];
    let b2 = b[0] * b[0] + b[1] * b[1];
    let c2 = c[0] * c[0] + c[1] * c[1];
    Some([
        (a2 * (b[1] - c[1]) + b2 * (c[1] - a[1]) + c2 * (a[1] - b[1])) / d,
        (a2 * (c[0] - b[0]) + b2 * (a[0] - c[0]) + c2 * (b[0] - a[0])) / d,
    ])
}

fn sorted(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

fn remove_support(map: &mut HashMap<(usize, usize), Vec<usize>>, key: (usize, usize), t: usize) {
    if let Some(v) = map.get_mut(&key) {
        v.retain(|&x| x != t);
        if v.is_empty() {
            map.remove(&key);
        }
    }
}

/// Rebuild the active element list (tree order) and the edge topology after
/// forest surgery.
fn rebuild_active(mesh: &mut TriMesh) -> Result<(), MeshError> {
    let mut active = Vec::new();
    let mut elements = Vec::new();
    for (t, elem) in mesh.forest().tree.iter().enumerate() {
        if elem.active && !elem.pruned {
            active.push(t);
            elements.push(super::Element {
                nodes: elem.nodes,
                level: elem.level,
                region_tag: elem.region_tag,
            });
        }
    }
    mesh.elements = elements;
    mesh.forest_mut().active = active;
    mesh.edges = build_edge_topology(mesh)?;
    for e in 0..mesh.elements.len() {
        let a = mesh.signed_area(e);
        if a <= 0.0 {
            return Err(MeshError::NegativeArea(e, a));
        }
    }
    Ok(())
}

fn combine_origins(a: &NodeOrigin, b: &NodeOrigin) -> NodeOrigin {
    let mut parts: BTreeMap<usize, f64> = BTreeMap::new();
    for (origin, scale) in [(a, 0.5), (b, 0.5)] {
        match origin {
            NodeOrigin::Existing(i) => *parts.entry(*i).or_insert(0.0) += scale,
            NodeOrigin::Edge { a, b, w } => {
                *parts.entry(*a).or_insert(0.0) += scale * w;
                *parts.entry(*b).or_insert(0.0) += scale * (1.0 - w);
            }
            NodeOrigin::Blend(v) => {
                for (i, w) in v {
                    *parts.entry(*i).or_insert(0.0) += scale * w;
                }
            }
        }
    }
    let parts: Vec<(usize, f64)> = parts.into_iter().collect();
    match parts[..] {
        [(i, _)] => NodeOrigin::Existing(i),
        [(a, w), (b, _)] => NodeOrigin::Edge { a, b, w },
        _ => NodeOrigin::Blend(parts),
    }
}
