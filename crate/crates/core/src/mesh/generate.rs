//! Mesh generators: structured right-triangle grids and the benchmark
//! geometries (edge-notched sheet, center-cracked slab, panel with holes,
//! bonded strip with a weak vertical seam).
//!
//! Cracks and notches are discrete: the slit either coincides with an
//! untagged stretch of the boundary (notch faces carry no constraint group)
//! or is built by duplicating nodes along an interior seam so the two faces
//! can separate.

use std::collections::HashMap;

use super::{MeshError, Node, RegionMap, TriMesh};

/// Tolerance for matching node coordinates against boundary lines, relative
/// to the cell size.
const TAG_TOL: f64 = 1e-6;

/// Structured grid on `[0,w] x [0,h]` shifted by `origin`, each cell split
/// into two triangles with the diagonal direction alternating checkerboard
/// fashion so no spurious global bias enters. Sides are tagged
/// left/right/bottom/top.
pub fn rect_structured(
    width: f64,
    height: f64,
    nx: usize,
    ny: usize,
    origin: [f64; 2],
) -> Result<TriMesh, MeshError> {
    let (nodes, elements) = grid_raw(width, height, nx, ny, origin)?;
    TriMesh::from_raw(nodes, elements, RegionMap::Inherit)
}

/// Unit square split into two triangles; the smallest mesh with an interior
/// edge. Sides tagged bottom/right/top/left.
pub fn unit_square_debug() -> TriMesh {
    rect_structured(1.0, 1.0, 1, 1, [0.0, 0.0]).expect("static geometry")
}

fn grid_raw(
    width: f64,
    height: f64,
    nx: usize,
    ny: usize,
    origin: [f64; 2],
) -> Result<(Vec<Node>, Vec<(usize, usize, usize)>), MeshError> {
    if !(width > 0.0) || !(height > 0.0) {
        return Err(MeshError::BadGeometry(format!(
            "rectangle {width} x {height} is not positive"
        )));
    }
    if nx == 0 || ny == 0 {
        return Err(MeshError::BadGeometry("grid needs at least one cell per side".into()));
    }
    let dx = width / nx as f64;
    let dy = height / ny as f64;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let mut node = Node::at(origin[0] + i as f64 * dx, origin[1] + j as f64 * dy);
            if i == 0 {
                node.tags.insert("left".into());
            }
            if i == nx {
                node.tags.insert("right".into());
            }
            if j == 0 {
                node.tags.insert("bottom".into());
            }
            if j == ny {
                node.tags.insert("top".into());
            }
            nodes.push(node);
        }
    }
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let bl = j * (nx + 1) + i;
            let br = bl + 1;
            let tl = bl + nx + 1;
            let tr = tl + 1;
            if (i + j) % 2 == 0 {
                elements.push((bl, br, tr));
                elements.push((bl, tr, tl));
            } else {
                elements.push((bl, br, tl));
                elements.push((br, tr, tl));
            }
        }
    }
    Ok((nodes, elements))
}

/// Cell counts for a grid of spacing `h0`; errors unless `h0` divides both
/// sides (within 1e-6 h0), so that boundary features land on grid lines.
fn grid_divisions(width: f64, height: f64, h0: f64) -> Result<(usize, usize), MeshError> {
    if !(h0 > 0.0) {
        return Err(MeshError::BadGeometry(format!("grid spacing {h0} is not positive")));
    }
    let count = |len: f64, name: &str| -> Result<usize, MeshError> {
        let n = (len / h0).round();
        if n < 1.0 || (n * h0 - len).abs() > TAG_TOL * h0 {
            return Err(MeshError::BadGeometry(format!(
                "spacing {h0} does not divide the {name} {len}"
            )));
        }
        Ok(n as usize)
    };
    Ok((count(width, "width")?, count(height, "height")?))
}

/// Quarter model of a sheet with symmetric edge notches at mid-height. The
/// domain is the upper-left quarter: the vertical centerline `x = width` is
/// tagged `sym_x`, the uncracked ligament `y = 0, x >= notch_len` is tagged
/// `sym_y` (the notch `x < notch_len` stays free), and the top edge is
/// tagged `load`.
pub fn double_edge_notch(
    width: f64,
    height: f64,
    notch_len: f64,
    h0: f64,
) -> Result<TriMesh, MeshError> {
    let (nx, ny) = grid_divisions(width, height, h0)?;
    check_slit(notch_len, width)?;
    let mut mesh = rect_structured(width, height, nx, ny, [0.0, 0.0])?;
    let tol = h0 * TAG_TOL;
    for node in &mut mesh.nodes {
        let [x, y] = node.x;
        node.tags.clear();
        if (x - width).abs() < tol {
            node.tags.insert("sym_x".into());
        }
        if y.abs() < tol && x >= notch_len - tol {
            node.tags.insert("sym_y".into());
        }
        if (y - height).abs() < tol {
            node.tags.insert("load".into());
        }
    }
    Ok(mesh)
}

/// Quarter model of a slab with a central horizontal crack. The vertical
/// centerline `x = 0` is tagged `sym_x`, the ligament `y = 0, x >= crack_len`
/// is tagged `sym_y` (the crack face stays free in `y`), and the top edge is
/// tagged `load`.
pub fn central_crack_slab(
    width: f64,
    height: f64,
    crack_len: f64,
    h0: f64,
) -> Result<TriMesh, MeshError> {
    let (nx, ny) = grid_divisions(width, height, h0)?;
    check_slit(crack_len, width)?;
    let mut mesh = rect_structured(width, height, nx, ny, [0.0, 0.0])?;
    let tol = h0 * TAG_TOL;
    for node in &mut mesh.nodes {
        let [x, y] = node.x;
        node.tags.clear();
        if x.abs() < tol {
            node.tags.insert("sym_x".into());
        }
        if y.abs() < tol && x >= crack_len - tol {
            node.tags.insert("sym_y".into());
        }
        if (y - height).abs() < tol {
            node.tags.insert("load".into());
        }
    }
    Ok(mesh)
}

fn check_slit(len: f64, width: f64) -> Result<(), MeshError> {
    if !(0.0..width).contains(&len) {
        return Err(MeshError::BadGeometry(format!(
            "slit length {len} must lie in [0, {width})"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoleSpec {
    pub center: [f64; 2],
    pub radius: f64,
}

/// Rectangular panel with circular holes, loaded horizontally: the left edge
/// is tagged `fixed`, the right edge `load`. Elements whose centroid falls
/// inside a hole are removed; surviving nodes inside a hole are projected
/// onto its rim, giving a faceted circle at the grid resolution.
pub fn holed_panel(
    width: f64,
    height: f64,
    holes: &[HoleSpec],
    h0: f64,
) -> Result<TriMesh, MeshError> {
    let (nx, ny) = grid_divisions(width, height, h0)?;
    for hole in holes {
        if !(hole.radius > 0.0) {
            return Err(MeshError::BadGeometry(format!(
                "hole radius {} is not positive",
                hole.radius
            )));
        }
    }
    let (mut nodes, elements) = grid_raw(width, height, nx, ny, [0.0, 0.0])?;
    for node in &mut nodes {
        let keep_fixed = node.tags.contains("left");
        let keep_load = node.tags.contains("right");
        node.tags.clear();
        if keep_fixed {
            node.tags.insert("fixed".into());
        }
        if keep_load {
            node.tags.insert("load".into());
        }
    }

    let inside = |x: [f64; 2], hole: &HoleSpec| -> bool {
        let dx = x[0] - hole.center[0];
        let dy = x[1] - hole.center[1];
        (dx * dx + dy * dy).sqrt() < hole.radius
    };
    let kept: Vec<(usize, usize, usize)> = elements
        .into_iter()
        .filter(|&(a, b, c)| {
            let centroid = [
                (nodes[a].x[0] + nodes[b].x[0] + nodes[c].x[0]) / 3.0,
                (nodes[a].x[1] + nodes[b].x[1] + nodes[c].x[1]) / 3.0,
            ];
            !holes.iter().any(|h| inside(centroid, h))
        })
        .collect();

    // compact away nodes that only supported removed elements
    let mut remap = vec![usize::MAX; nodes.len()];
    let mut kept_nodes = Vec::new();
    for &(a, b, c) in &kept {
        for n in [a, b, c] {
            if remap[n] == usize::MAX {
                remap[n] = kept_nodes.len();
                kept_nodes.push(nodes[n].clone());
            }
        }
    }
    let kept: Vec<(usize, usize, usize)> =
        kept.into_iter().map(|(a, b, c)| (remap[a], remap[b], remap[c])).collect();

    // rim projection: surviving nodes inside a hole move radially outward
    for node in &mut kept_nodes {
        for hole in holes {
            let dx = node.x[0] - hole.center[0];
            let dy = node.x[1] - hole.center[1];
            let d = (dx * dx + dy * dy).sqrt();
            if d < hole.radius {
                if d < 1e-9 * hole.radius {
                    return Err(MeshError::BadGeometry(
                        "node at a hole center cannot be projected to the rim".into(),
                    ));
                }
                let s = hole.radius / d;
                node.x = [hole.center[0] + dx * s, hole.center[1] + dy * s];
            }
        }
    }

    TriMesh::from_raw(kept_nodes, kept, RegionMap::Inherit)
}

/// Full strip of two sheets bonded along a vertical seam, with a horizontal
/// pre-crack: nodes on `y = height/2` with `x < crack_len` are duplicated so
/// the faces can separate, while the tip node at `x = crack_len` stays
/// shared. The bottom edge is tagged `grip_bottom`, the top `grip_top`.
/// `region` assigns material region tags (the weakened seam band).
pub fn interface_strip(
    width: f64,
    height: f64,
    crack_len: f64,
    h0: f64,
    region: RegionMap,
) -> Result<TriMesh, MeshError> {
    let (nx, ny) = grid_divisions(width, height, h0)?;
    if ny % 2 != 0 {
        return Err(MeshError::BadGeometry(format!(
            "spacing {h0} must put a grid line on the seam at {}",
            height / 2.0
        )));
    }
    check_slit(crack_len, width)?;
    let (mut nodes, elements) = grid_raw(width, height, nx, ny, [0.0, 0.0])?;
    for node in &mut nodes {
        let keep_bottom = node.tags.contains("bottom");
        let keep_top = node.tags.contains("top");
        node.tags.clear();
        if keep_bottom {
            node.tags.insert("grip_bottom".into());
        }
        if keep_top {
            node.tags.insert("grip_top".into());
        }
    }

    let seam_y = height / 2.0;
    let tol = h0 * TAG_TOL;
    let j_seam = ny / 2;
    let split_ids: Vec<usize> = (0..=nx)
        .map(|i| j_seam * (nx + 1) + i)
        .filter(|&id| nodes[id].x[0] < crack_len - tol)
        .collect();
    let mut duplicate: HashMap<usize, usize> = HashMap::new();
    for &id in &split_ids {
        duplicate.insert(id, nodes.len());
        nodes.push(nodes[id].clone());
    }

    let elements: Vec<(usize, usize, usize)> = elements
        .into_iter()
        .map(|(a, b, c)| {
            let cy = (nodes[a].x[1] + nodes[b].x[1] + nodes[c].x[1]) / 3.0;
            if cy > seam_y {
                let swap = |n: usize| duplicate.get(&n).copied().unwrap_or(n);
                (swap(a), swap(b), swap(c))
            } else {
                (a, b, c)
            }
        })
        .collect();

    for node in &mut nodes {
        node.region_tag = region.tag_at(node.x).unwrap_or(0);
    }
    TriMesh::from_raw(nodes, elements, region)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_counts_and_tags() {
        let mesh = rect_structured(3.0, 2.0, 3, 2, [0.0, 0.0]).unwrap();
        assert_eq!(mesh.nodes.len(), 12);
        assert_eq!(mesh.elements.len(), 12);
        assert!((mesh.total_area() - 6.0).abs() < 1e-12);
        assert_eq!(mesh.group_nodes("left").len(), 3);
        assert_eq!(mesh.group_nodes("bottom").len(), 4);
        // corner carries both tags
        assert!(mesh.nodes[0].tags.contains("left") && mesh.nodes[0].tags.contains("bottom"));
    }

    #[test]
    fn checkerboard_diagonals_alternate() {
        let mesh = rect_structured(2.0, 1.0, 2, 1, [0.0, 0.0]).unwrap();
        let has_edge = |a: usize, b: usize| {
            mesh.edges.iter().any(|e| e.nodes == [a.min(b), a.max(b)])
        };
        // cell (0,0): diagonal bl-tr; cell (1,0): diagonal br-tl
        assert!(has_edge(0, 4));
        assert!(has_edge(2, 4));
    }

    #[test]
    fn notch_quarter_tags() {
        let mesh = double_edge_notch(40.0, 100.0, 16.0, 4.0).unwrap();
        let at = |x: f64, y: f64| {
            mesh.nodes
                .iter()
                .find(|n| (n.x[0] - x).abs() < 1e-9 && (n.x[1] - y).abs() < 1e-9)
                .unwrap()
        };
        assert!(at(12.0, 0.0).tags.is_empty(), "notch face is free");
        assert_eq!(at(16.0, 0.0).tags.iter().collect::<Vec<_>>(), ["sym_y"]);
        assert!(at(40.0, 0.0).tags.contains("sym_x") && at(40.0, 0.0).tags.contains("sym_y"));
        assert!(at(40.0, 100.0).tags.contains("load") && at(40.0, 100.0).tags.contains("sym_x"));
        assert!(at(0.0, 100.0).tags.iter().eq(["load"].iter()));
    }

    #[test]
    fn center_crack_quarter_tags() {
        let mesh = central_crack_slab(5.0, 5.0, 1.0, 0.5).unwrap();
        let at = |x: f64, y: f64| {
            mesh.nodes
                .iter()
                .find(|n| (n.x[0] - x).abs() < 1e-9 && (n.x[1] - y).abs() < 1e-9)
                .unwrap()
        };
        // crack mouth: on the centerline but not on the ligament
        assert_eq!(at(0.0, 0.0).tags.iter().collect::<Vec<_>>(), ["sym_x"]);
        assert!(at(0.5, 0.0).tags.is_empty());
        assert_eq!(at(1.0, 0.0).tags.iter().collect::<Vec<_>>(), ["sym_y"]);
    }

    #[test]
    fn holed_panel_carves_and_projects() {
        let holes = [
            HoleSpec { center: [15.0, 25.0], radius: 5.0 },
            HoleSpec { center: [25.0, 15.0], radius: 5.0 },
        ];
        let mesh = holed_panel(40.0, 40.0, &holes, 1.0).unwrap();
        let full = 40.0 * 40.0;
        let carved = 2.0 * std::f64::consts::PI * 25.0;
        let area = mesh.total_area();
        assert!(area < full - 0.9 * carved);
        assert!(area > full - 1.1 * carved);
        for node in &mesh.nodes {
            for hole in &holes {
                let d = ((node.x[0] - hole.center[0]).powi(2)
                    + (node.x[1] - hole.center[1]).powi(2))
                .sqrt();
                assert!(d >= hole.radius - 1e-9);
            }
        }
        assert_eq!(mesh.group_nodes("fixed").len(), 41);
        assert_eq!(mesh.group_nodes("load").len(), 41);
        assert!(mesh.min_angle_deg() > 5.0);
    }

    #[test]
    fn interface_strip_duplicates_seam_up_to_tip() {
        let region = RegionMap::VerticalBand { x0: 11.6, x1: 12.4, tag: 1 };
        let mesh = interface_strip(24.0, 120.0, 12.0, 1.5, region).unwrap();
        assert!((mesh.total_area() - 24.0 * 120.0).abs() < 1e-9);
        let seam_nodes: Vec<usize> = (0..mesh.nodes.len())
            .filter(|&n| mesh.nodes[n].x[1] == 60.0)
            .collect();
        // 17 grid nodes on the seam line, 8 of them (x < 12) duplicated
        assert_eq!(seam_nodes.len(), 17 + 8);
        let tips: Vec<usize> = seam_nodes
            .iter()
            .copied()
            .filter(|&n| mesh.nodes[n].x[0] == 12.0)
            .collect();
        assert_eq!(tips.len(), 1, "crack tip node stays shared");
        // crack faces (any endpoint left of the tip) are boundary edges,
        // the seam ahead of the tip is interior
        let seam_edges: Vec<_> = mesh
            .edges
            .iter()
            .filter(|e| e.nodes.iter().all(|&n| mesh.nodes[n].x[1] == 60.0))
            .collect();
        let (crack, ahead): (Vec<&crate::mesh::Edge>, Vec<&crate::mesh::Edge>) = seam_edges
            .into_iter()
            .partition(|e| e.nodes.iter().any(|&n| mesh.nodes[n].x[0] < 12.0));
        assert_eq!(crack.len(), 16, "eight segments, two faces each");
        assert!(crack.iter().all(|e| e.is_boundary));
        assert_eq!(ahead.len(), 8);
        assert!(ahead.iter().all(|e| !e.is_boundary));
        assert_eq!(mesh.group_nodes("grip_bottom").len(), 17);
        assert_eq!(mesh.group_nodes("grip_top").len(), 17);
        // nodes on the seam line carry the band's region tag
        assert!(mesh.nodes.iter().any(|n| n.region_tag == 1));
        assert!(mesh
            .nodes
            .iter()
            .all(|n| (n.region_tag == 1) == (n.x[0] >= 11.6 && n.x[0] <= 12.4)));
    }

    #[test]
    fn bad_spacing_is_rejected() {
        assert!(rect_structured(1.0, 1.0, 0, 1, [0.0, 0.0]).is_err());
        assert!(double_edge_notch(40.0, 100.0, 16.0, 3.0).is_err());
        assert!(interface_strip(24.0, 120.0, 12.0, 1.0, RegionMap::Inherit)
            .map(|_| ())
            .is_ok());
        // odd row count puts no grid line on the seam
        assert!(interface_strip(24.0, 121.0, 12.0, 1.0, RegionMap::Inherit).is_err());
        assert!(central_crack_slab(5.0, 5.0, 5.0, 0.5).is_err());
    }
}
