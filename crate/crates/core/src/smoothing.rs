//! Edge-based strain smoothing: each mesh edge owns a smoothing domain made
//! of one third of every supporting element, and gradients are averaged over
//! that domain. Smoothed quantities replace element-level gradients
//! everywhere downstream, so a domain stores, per support node, the averaged
//! gradient row and the averaged shape value.

use crate::mesh::{MeshError, TriMesh};
use crate::tensor::{ata, det2, Mat2, IDENTITY};

#[derive(Debug, Clone)]
pub struct SmoothingDomain {
    pub edge_id: usize,
    /// One third of the supporting elements' summed area (mm^2).
    pub area: f64,
    /// Unique nodes of the supporting elements, ascending: 3 for a boundary
    /// edge, 4 for an interior one.
    pub support_nodes: Vec<usize>,
    /// Smoothed gradient row per support node (1/mm). Rows sum to zero.
    pub bbar: Vec<[f64; 2]>,
    /// Smoothed shape value per support node. Values sum to one.
    pub nbar: Vec<f64>,
    /// Majority region tag of the supporting elements; ties fall back to
    /// bulk (0).
    pub region_tag: u16,
}

impl SmoothingDomain {
    /// Domain average of a nodal scalar field.
    pub fn average(&self, field: &[f64]) -> f64 {
        self.support_nodes
            .iter()
            .zip(&self.nbar)
            .map(|(&n, w)| w * field[n])
            .sum()
    }

    /// Smoothed gradient of a nodal scalar field.
    pub fn gradient(&self, field: &[f64]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (&n, b) in self.support_nodes.iter().zip(&self.bbar) {
            g[0] += b[0] * field[n];
            g[1] += b[1] * field[n];
        }
        g
    }
}

/// Smoothed kinematic state of one domain under a displacement field.
#[derive(Debug, Clone, Copy)]
pub struct SmoothedKinematics {
    /// Displacement gradient H_ij = du_i/dX_j.
    pub hbar: Mat2,
    /// Deformation gradient F = I + H.
    pub fbar: Mat2,
    /// Right Cauchy-Green tensor C = F^T F.
    pub cbar: Mat2,
    /// In-plane determinant of F; <= 0 signals an inverted configuration.
    pub jbar: f64,
}

/// Constant shape-function gradient rows of a straight-sided triangle, one
/// row (d/dx, d/dy) per corner in input order.
pub fn element_gradient(p: [[f64; 2]; 3]) -> Result<[[f64; 2]; 3], MeshError> {
    let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
        - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    if !(two_a > 0.0) {
        return Err(MeshError::BadGeometry(format!(
            "triangle with doubled area {two_a} has no gradient"
        )));
    }
    let mut rows = [[0.0; 2]; 3];
    for i in 0..3 {
        let q = p[(i + 1) % 3];
        let r = p[(i + 2) % 3];
        rows[i] = [(q[1] - r[1]) / two_a, (r[0] - q[0]) / two_a];
    }
    Ok(rows)
}

/// Build one smoothing domain per mesh edge. Per support node, the domain
/// carries the area-weighted average of the supporting elements' constant
/// gradient rows and shape values (a node absent from an element contributes
/// zero from it).
pub fn build_smoothing_domains(mesh: &TriMesh) -> Result<Vec<SmoothingDomain>, MeshError> {
    let mut domains = Vec::with_capacity(mesh.edges.len());
    for (edge_id, edge) in mesh.edges.iter().enumerate() {
        let mut support_nodes: Vec<usize> = edge
            .support
            .iter()
            .flat_map(|&e| mesh.elements[e].nodes)
            .collect();
        support_nodes.sort_unstable();
        support_nodes.dedup();

        let index_of = |n: usize| support_nodes.iter().position(|&s| s == n).unwrap();
        let mut area = 0.0;
        let mut bbar = vec![[0.0; 2]; support_nodes.len()];
        let mut nbar = vec![0.0; support_nodes.len()];
        for &e in &edge.support {
            let nodes = mesh.elements[e].nodes;
            let coords = nodes.map(|n| mesh.nodes[n].x);
            let grads = element_gradient(coords)?;
            let a_third = mesh.signed_area(e) / 3.0;
            area += a_third;
            for (local, &n) in nodes.iter().enumerate() {
                let k = index_of(n);
                bbar[k][0] += a_third * grads[local][0];
                bbar[k][1] += a_third * grads[local][1];
                nbar[k] += a_third / 3.0;
            }
        }
        for b in &mut bbar {
            b[0] /= area;
            b[1] /= area;
        }
        for w in &mut nbar {
            *w /= area;
        }

        let tags: Vec<u16> = edge.support.iter().map(|&e| mesh.elements[e].region_tag).collect();
        let region_tag = match tags[..] {
            [t] => t,
            [t1, t2] if t1 == t2 => t1,
            _ => 0,
        };

        domains.push(SmoothingDomain { edge_id, area, support_nodes, bbar, nbar, region_tag });
    }
    Ok(domains)
}

/// Smoothed deformation state of a domain from a flat nodal displacement
/// vector (x, y interleaved).
pub fn smoothed_deformation(domain: &SmoothingDomain, u: &[f64]) -> SmoothedKinematics {
    let mut hbar = [[0.0; 2]; 2];
    for (&n, b) in domain.support_nodes.iter().zip(&domain.bbar) {
        for i in 0..2 {
            hbar[i][0] += u[2 * n + i] * b[0];
            hbar[i][1] += u[2 * n + i] * b[1];
        }
    }
    let mut fbar = IDENTITY;
    for i in 0..2 {
        for j in 0..2 {
            fbar[i][j] += hbar[i][j];
        }
    }
    SmoothedKinematics { hbar, fbar, cbar: ata(&fbar), jbar: det2(&fbar) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{rect_structured, unit_square_debug, RegionMap, TriMesh};

    #[test]
    fn reference_triangle_gradients() {
        let rows = element_gradient([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(rows, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn gradient_reproduces_linear_field() {
        let p = [[0.2, -0.1], [1.4, 0.3], [0.5, 2.0]];
        let rows = element_gradient(p).unwrap();
        // f = 3x - 2y + 1
        let f: Vec<f64> = p.iter().map(|q| 3.0 * q[0] - 2.0 * q[1] + 1.0).collect();
        let gx: f64 = (0..3).map(|i| rows[i][0] * f[i]).sum();
        let gy: f64 = (0..3).map(|i| rows[i][1] * f[i]).sum();
        assert!((gx - 3.0).abs() < 1e-14);
        assert!((gy + 2.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        assert!(element_gradient([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
    }

    #[test]
    fn two_element_square_domain_areas() {
        let mesh = unit_square_debug();
        let domains = build_smoothing_domains(&mesh).unwrap();
        assert_eq!(domains.len(), 5);
        for d in &domains {
            let edge = &mesh.edges[d.edge_id];
            if edge.is_boundary {
                assert!((d.area - 1.0 / 6.0).abs() < 1e-15);
                assert_eq!(d.support_nodes.len(), 3);
            } else {
                assert!((d.area - 1.0 / 3.0).abs() < 1e-15);
                assert_eq!(d.support_nodes, vec![0, 1, 2, 3]);
            }
        }
        let total: f64 = domains.iter().map(|d| d.area).sum();
        assert!((total - mesh.total_area()).abs() < 1e-14);
    }

    #[test]
    fn rows_sum_to_zero_and_shapes_to_one() {
        let mesh = rect_structured(2.0, 3.0, 4, 5, [0.3, -1.0]).unwrap();
        for d in build_smoothing_domains(&mesh).unwrap() {
            let sum = d.bbar.iter().fold([0.0; 2], |acc, b| [acc[0] + b[0], acc[1] + b[1]]);
            assert!(sum[0].abs() < 1e-12 && sum[1].abs() < 1e-12);
            let n: f64 = d.nbar.iter().sum();
            assert!((n - 1.0).abs() < 1e-12);
            assert!(d.nbar.iter().all(|&w| w > 0.0));
        }
    }

    #[test]
    fn affine_displacement_is_reproduced_exactly() {
        let mesh = rect_structured(2.0, 1.0, 3, 2, [0.0, 0.0]).unwrap();
        let a = [[1.1, 0.3], [-0.2, 0.95]];
        let mut u = vec![0.0; 2 * mesh.nodes.len()];
        for (n, node) in mesh.nodes.iter().enumerate() {
            for i in 0..2 {
                u[2 * n + i] =
                    (a[i][0] - IDENTITY[i][0]) * node.x[0] + (a[i][1] - IDENTITY[i][1]) * node.x[1];
            }
        }
        for d in build_smoothing_domains(&mesh).unwrap() {
            let kin = smoothed_deformation(&d, &u);
            for i in 0..2 {
                for j in 0..2 {
                    assert!((kin.fbar[i][j] - a[i][j]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_displacement_gives_identity_kinematics() {
        let mesh = unit_square_debug();
        let u = vec![0.0; 8];
        for d in build_smoothing_domains(&mesh).unwrap() {
            let kin = smoothed_deformation(&d, &u);
            assert_eq!(kin.fbar, IDENTITY);
            assert_eq!(kin.cbar, IDENTITY);
            assert_eq!(kin.jbar, 1.0);
        }
    }

    #[test]
    fn scalar_average_and_gradient_reproduce_linear_field() {
        let mesh = rect_structured(1.0, 1.0, 2, 2, [0.0, 0.0]).unwrap();
        let phi: Vec<f64> = mesh.nodes.iter().map(|n| 0.5 * n.x[0] - 0.25 * n.x[1]).collect();
        for d in build_smoothing_domains(&mesh).unwrap() {
            let g = d.gradient(&phi);
            assert!((g[0] - 0.5).abs() < 1e-13);
            assert!((g[1] + 0.25).abs() < 1e-13);
        }
    }

    #[test]
    fn region_tag_majority_with_tie_to_bulk() {
        let mesh = unit_square_debug();
        let band = RegionMap::VerticalBand { x0: 0.5, x1: 1.0, tag: 7 };
        let elements = mesh.elements.iter().map(|e| (e.nodes, e.level)).collect();
        let tagged = TriMesh::from_leveled(mesh.nodes.clone(), elements, band).unwrap();
        assert_eq!(tagged.elements[0].region_tag, 7);
        assert_eq!(tagged.elements[1].region_tag, 0);
        for d in build_smoothing_domains(&tagged).unwrap() {
            let edge = &tagged.edges[d.edge_id];
            if edge.is_boundary {
                assert_eq!(d.region_tag, tagged.elements[edge.support[0]].region_tag);
            } else {
                assert_eq!(d.region_tag, 0, "mixed supports fall back to bulk");
            }
        }
    }
}
