//! Geometric checks of the edge-based smoothing domains: the domains must
//! partition the mesh area exactly, and the averaged gradient matrices must
//! equal the boundary integral (1/A_k) * integral of N n ds over the domain
//! boundary, computed here from scratch via barycentric shape evaluation at
//! segment midpoints, independent of the area-weighted assembly under test.

use esfrac::constitutive::MaterialModel;
use esfrac::mesh::{rect_structured, refine, signed_area_of, TriMesh};
use esfrac::phasefield::{CrackModel, CrackVariant};
use esfrac::smoothing::build_smoothing_domains;
use esfrac::solver::{newton_update_u, Problem, SolverConfig};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Structured rectangle with interior nodes jittered by `amp` times the
/// spacing. Boundary nodes stay put so the outline and tags survive.
fn perturbed_rect(nx: usize, ny: usize, amp: f64, rng: &mut ChaCha8Rng) -> TriMesh {
    let mut mesh = rect_structured(nx as f64, ny as f64, nx, ny, [0.0, 0.0]).unwrap();
    let boundary = mesh.boundary_nodes();
    for (n, on_boundary) in boundary.iter().enumerate() {
        if !on_boundary {
            mesh.nodes[n].x[0] += amp * rng.random_range(-1.0..1.0);
            mesh.nodes[n].x[1] += amp * rng.random_range(-1.0..1.0);
        }
    }
    mesh
}

/// Jittered, partially refined meshes exercising hanging-node closures.
fn random_meshes(count: usize, seed: u64) -> Vec<TriMesh> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let nx = rng.random_range(2..8);
            let ny = rng.random_range(2..8);
            let amp = rng.random_range(0.0..0.3);
            let mut mesh = perturbed_rect(nx, ny, amp, &mut rng);
            for _ in 0..rng.random_range(0..3usize) {
                let marked: Vec<usize> =
                    (0..mesh.elements.len()).filter(|_| rng.random_bool(0.3)).collect();
                mesh = refine(&mesh, &marked).unwrap().0;
            }
            mesh
        })
        .collect()
}

#[test]
fn domain_areas_partition_the_mesh() {
    for mesh in random_meshes(50, 21) {
        let domains = build_smoothing_domains(&mesh).unwrap();
        let total: f64 = domains.iter().map(|d| d.area).sum();
        let area = mesh.total_area();
        assert!(
            (total - area).abs() <= 1e-12 * area,
            "domain areas sum to {total}, mesh area {area}"
        );
        assert_eq!(domains.len(), mesh.edges.len());
    }
}

#[test]
fn every_element_feeds_exactly_three_domains() {
    for mesh in random_meshes(10, 22) {
        let mut uses = vec![0usize; mesh.elements.len()];
        for edge in &mesh.edges {
            for &e in &edge.support {
                uses[e] += 1;
            }
        }
        assert!(uses.iter().all(|&c| c == 3));
    }
}

/// Barycentric shape values of triangle `p` at point `m`.
fn shape_at(p: [[f64; 2]; 3], m: [f64; 2]) -> [f64; 3] {
    let d = signed_area_of(p[0], p[1], p[2]) * 2.0;
    let s = signed_area_of(p[0], m, p[2]) * 2.0 / d;
    let t = signed_area_of(p[0], p[1], m) * 2.0 / d;
    [1.0 - s - t, s, t]
}

#[test]
fn bbar_matches_boundary_integral_of_shape_functions() {
    for mesh in random_meshes(12, 23) {
        let domains = build_smoothing_domains(&mesh).unwrap();
        for (domain, edge) in domains.iter().zip(&mesh.edges) {
            let [a, b] = edge.nodes;
            let mut area = 0.0;
            let mut rows = vec![[0.0f64; 2]; domain.support_nodes.len()];
            let slot = |n: usize| domain.support_nodes.iter().position(|&s| s == n).unwrap();
            for &e in &edge.support {
                let enodes = mesh.elements[e].nodes;
                let coords = enodes.map(|n| mesh.nodes[n].x);
                let c = [
                    (coords[0][0] + coords[1][0] + coords[2][0]) / 3.0,
                    (coords[0][1] + coords[1][1] + coords[2][1]) / 3.0,
                ];
                // CCW sub-triangle joining the edge to the element centroid;
                // the edge side itself cancels between the two support
                // elements (or lies on the mesh boundary).
                let (pa, pb) = (mesh.nodes[a].x, mesh.nodes[b].x);
                let tri = if signed_area_of(pa, pb, c) > 0.0 { [pa, pb, c] } else { [pb, pa, c] };
                area += signed_area_of(tri[0], tri[1], tri[2]);
                for k in 0..3 {
                    let (p, q) = (tri[k], tri[(k + 1) % 3]);
                    let mid = [(p[0] + q[0]) / 2.0, (p[1] + q[1]) / 2.0];
                    // outward normal times segment length, CCW traversal
                    let nds = [q[1] - p[1], p[0] - q[0]];
                    let shapes = shape_at(coords, mid);
                    for (local, &n) in enodes.iter().enumerate() {
                        rows[slot(n)][0] += shapes[local] * nds[0];
                        rows[slot(n)][1] += shapes[local] * nds[1];
                    }
                }
            }
            let scale = domain
                .bbar
                .iter()
                .flatten()
                .map(|x| x.abs())
                .fold(1e-12, f64::max);
            assert!((area - domain.area).abs() <= 1e-12 * domain.area.max(1.0));
            for (row, built) in rows.iter().zip(&domain.bbar) {
                for c in 0..2 {
                    let want = row[c] / area;
                    assert!(
                        (want - built[c]).abs() <= 1e-10 * scale,
                        "edge {}: boundary integral {want} vs assembled {}",
                        domain.edge_id,
                        built[c]
                    );
                }
            }
        }
    }
}

#[test]
fn bbar_rows_annihilate_constants_and_nbar_averages_them() {
    for mesh in random_meshes(10, 24) {
        let domains = build_smoothing_domains(&mesh).unwrap();
        for d in &domains {
            let ones = vec![1.0; mesh.nodes.len()];
            let g = d.gradient(&ones);
            assert!(g[0].abs() <= 1e-12 && g[1].abs() <= 1e-12);
            assert!((d.average(&ones) - 1.0).abs() <= 1e-12);
        }
    }
}

/// Linear fields are reproduced exactly: the smoothed gradient of a nodal
/// sampling of f(x) = p + q.x is q on every domain.
#[test]
fn smoothed_gradient_is_exact_on_linear_fields() {
    for mesh in random_meshes(10, 25) {
        let domains = build_smoothing_domains(&mesh).unwrap();
        let (p, q) = (0.7, [1.3, -2.1]);
        let field: Vec<f64> =
            mesh.nodes.iter().map(|n| p + q[0] * n.x[0] + q[1] * n.x[1]).collect();
        for d in &domains {
            let g = d.gradient(&field);
            assert!((g[0] - q[0]).abs() <= 1e-10 && (g[1] - q[1]).abs() <= 1e-10);
        }
    }
}

/// Patch test: with every boundary node pinned to an affine map, the Newton
/// solve must place the interior nodes on the same affine map, since a
/// homogeneous deformation is an exact equilibrium state.
#[test]
fn affine_boundary_data_is_reproduced_at_interior_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    let mesh = perturbed_rect(5, 4, 0.25, &mut rng);
    let domains = build_smoothing_domains(&mesh).unwrap();
    let material = MaterialModel::nu_form(0.612, 0.45, 1e-8).unwrap();
    let crack = CrackModel::new(CrackVariant::At2, 1.0, 1.0, None, 0.0).unwrap();
    let p = Problem { mesh: &mesh, domains: &domains, material: &material, crack: &crack };

    let grad = [[0.031, 0.012], [-0.024, 0.043]];
    let affine = |x: [f64; 2]| {
        [grad[0][0] * x[0] + grad[0][1] * x[1], grad[1][0] * x[0] + grad[1][1] * x[1]]
    };
    let boundary = mesh.boundary_nodes();
    let mut pinned = Vec::new();
    for (n, on_boundary) in boundary.iter().enumerate() {
        if *on_boundary {
            let u = affine(mesh.nodes[n].x);
            pinned.push((2 * n, u[0]));
            pinned.push((2 * n + 1, u[1]));
        }
    }

    let mut u = vec![0.0; 2 * mesh.nodes.len()];
    let phi = vec![0.0; mesh.nodes.len()];
    let external = vec![0.0; 2 * mesh.nodes.len()];
    let mut step_ref = None;
    let config = SolverConfig { staggered_tol: 1e-9, ..SolverConfig::default() };
    newton_update_u(&p, &mut u, &phi, &external, &pinned, &mut step_ref, &config).unwrap();

    for (n, on_boundary) in boundary.iter().enumerate() {
        if !on_boundary {
            let want = affine(mesh.nodes[n].x);
            for c in 0..2 {
                assert!(
                    (u[2 * n + c] - want[c]).abs() <= 1e-10,
                    "node {n} component {c}: {} vs affine {}",
                    u[2 * n + c],
                    want[c]
                );
            }
        }
    }
}
