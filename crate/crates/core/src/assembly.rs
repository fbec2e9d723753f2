//! Global tangent systems and residuals for the displacement and phase-field
//! subproblems, assembled domain-by-domain from smoothed quantities, plus
//! Dirichlet bookkeeping and reaction extraction.
//!
//! Sign convention: `rhs` holds the residual f (internal minus external
//! forces), so a Newton update solves K d = -f. Dirichlet constraints are
//! carried as (dof, prescribed increment) pairs and eliminated by the linear
//! solver, which keeps the constrained residual rows intact for exact
//! reaction extraction.

use std::collections::BTreeMap;

use crate::constitutive::{degrade, strain_energy_c, stress_state, MaterialError, MaterialModel};
use crate::mesh::TriMesh;
use crate::phasefield::{CrackModel, CrackVariant};
use crate::smoothing::{smoothed_deformation, SmoothingDomain};

#[derive(Debug, thiserror::Error)]
pub enum AssemblyError {
    #[error("inverted configuration on smoothing domain {domain}: det F = {jbar}")]
    Inverted { domain: usize, jbar: f64 },
    #[error(transparent)]
    Material(#[from] MaterialError),
    #[error("node {node} component {component} constrained to conflicting values")]
    ConflictingConstraint { node: usize, component: usize },
    #[error("unknown boundary group '{0}'")]
    UnknownGroup(String),
}

/// Node-to-global-index mapping for both fields: displacement dofs are
/// interleaved (2n, 2n+1), phase dofs coincide with node ids.
#[derive(Debug, Clone, Copy)]
pub struct DofMap {
    nodes: usize,
}

impl DofMap {
    pub fn new(mesh: &TriMesh) -> Self {
        DofMap { nodes: mesh.nodes.len() }
    }

    pub fn u(&self, node: usize, component: usize) -> usize {
        debug_assert!(node < self.nodes && component < 2);
        2 * node + component
    }

    pub fn phi(&self, node: usize) -> usize {
        debug_assert!(node < self.nodes);
        node
    }

    pub fn n_u_dofs(&self) -> usize {
        2 * self.nodes
    }

    pub fn n_phi_dofs(&self) -> usize {
        self.nodes
    }
}

/// One assembled linear system: sparse matrix in triplet form, residual
/// vector over all dofs, and the constrained dofs with their prescribed
/// increments for the next solve.
#[derive(Debug, Clone)]
pub struct GlobalSystem {
    pub n: usize,
    pub triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
    pub constrained: Vec<(usize, f64)>,
}

/// Dirichlet data for one node group: per component, the prescribed
/// displacement at load factor one (`None` leaves the component free).
#[derive(Debug, Clone, PartialEq)]
pub struct DirichletSpec {
    pub group: String,
    pub components: [Option<f64>; 2],
}

/// Traction applied to the boundary edges of one node group, lumped to nodes
/// by edge length.
#[derive(Debug, Clone, PartialEq)]
pub struct TractionSpec {
    pub group: String,
    /// Force per unit reference length (N/mm per mm thickness) at load
    /// factor one.
    pub t: [f64; 2],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryConditions {
    pub dirichlet: Vec<DirichletSpec>,
    pub tractions: Vec<TractionSpec>,
}

impl BoundaryConditions {
    /// Absolute prescribed displacement per constrained dof at the given
    /// load factor, sorted by dof. Groups must exist; a dof claimed twice
    /// must agree.
    pub fn targets(
        &self,
        mesh: &TriMesh,
        load_factor: f64,
    ) -> Result<Vec<(usize, f64)>, AssemblyError> {
        let mut map: BTreeMap<usize, f64> = BTreeMap::new();
        for spec in &self.dirichlet {
            let nodes = mesh.group_nodes(&spec.group);
            if nodes.is_empty() {
                return Err(AssemblyError::UnknownGroup(spec.group.clone()));
            }
            for node in nodes {
                for (component, value) in spec.components.iter().enumerate() {
                    let Some(v) = value else { continue };
                    let target = v * load_factor;
                    let dof = 2 * node + component;
                    if let Some(&prev) = map.get(&dof) {
                        if (prev - target).abs() > 1e-12 * (1.0 + target.abs()) {
                            return Err(AssemblyError::ConflictingConstraint { node, component });
                        }
                    }
                    map.insert(dof, target);
                }
            }
        }
        Ok(map.into_iter().collect())
    }

    /// Constraint increments (target minus current) for the next solve.
    pub fn increments(
        &self,
        mesh: &TriMesh,
        load_factor: f64,
        u: &[f64],
    ) -> Result<Vec<(usize, f64)>, AssemblyError> {
        Ok(self
            .targets(mesh, load_factor)?
            .into_iter()
            .map(|(dof, target)| (dof, target - u[dof]))
            .collect())
    }

    /// External nodal force vector from the traction specs at the given load
    /// factor: each boundary edge with both endpoints in the group carries
    /// t * L / 2 to each endpoint.
    pub fn external_forces(
        &self,
        mesh: &TriMesh,
        load_factor: f64,
    ) -> Result<Vec<f64>, AssemblyError> {
        let mut f = vec![0.0; 2 * mesh.nodes.len()];
        for spec in &self.tractions {
            if mesh.group_nodes(&spec.group).is_empty() {
                return Err(AssemblyError::UnknownGroup(spec.group.clone()));
            }
            for edge in mesh.edges.iter().filter(|e| e.is_boundary) {
                let [a, b] = edge.nodes;
                if !(mesh.nodes[a].tags.contains(&spec.group)
                    && mesh.nodes[b].tags.contains(&spec.group))
                {
                    continue;
                }
                let dx = mesh.nodes[a].x[0] - mesh.nodes[b].x[0];
                let dy = mesh.nodes[a].x[1] - mesh.nodes[b].x[1];
                let half_len = 0.5 * (dx * dx + dy * dy).sqrt();
                for n in [a, b] {
                    for c in 0..2 {
                        f[2 * n + c] += load_factor * spec.t[c] * half_len;
                    }
                }
            }
        }
        Ok(f)
    }
}

/// Strain-displacement rows of one support node in the total-Lagrangian
/// setting: maps nodal displacement increments to increments of
/// (E11, E22, 2 E12) through the current deformation gradient.
fn b0_rows(b: [f64; 2], f: &[[f64; 2]; 2]) -> [[f64; 2]; 3] {
    [
        [f[0][0] * b[0], f[1][0] * b[0]],
        [f[0][1] * b[1], f[1][1] * b[1]],
        [
            f[0][0] * b[1] + f[0][1] * b[0],
            f[1][0] * b[1] + f[1][1] * b[0],
        ],
    ]
}

/// Assemble the displacement tangent and residual at state (u, phi): per
/// domain, material stiffness B0^T C B0, geometric stiffness from the
/// degraded second Piola-Kirchhoff stress, and internal force B0^T {S},
/// minus the external force vector.
pub fn assemble_displacement(
    mesh: &TriMesh,
    domains: &[SmoothingDomain],
    u: &[f64],
    phi: &[f64],
    material: &MaterialModel,
    external: &[f64],
    constraints: &[(usize, f64)],
) -> Result<GlobalSystem, AssemblyError> {
    let n = 2 * mesh.nodes.len();
    let mut triplets = Vec::with_capacity(domains.len() * 64);
    let mut rhs = vec![0.0; n];
    for d in domains {
        let kin = smoothed_deformation(d, u);
        if !(kin.jbar > 0.0 && kin.jbar.is_finite()) {
            return Err(AssemblyError::Inverted { domain: d.edge_id, jbar: kin.jbar });
        }
        let state = degrade(&stress_state(&kin.cbar, material)?, d.average(phi), material)?;
        let area = d.area;
        let b0: Vec<[[f64; 2]; 3]> =
            d.bbar.iter().map(|&b| b0_rows(b, &kin.fbar)).collect();
        let s_mat = [[state.s[0], state.s[2]], [state.s[2], state.s[1]]];

        for (k, &nk) in d.support_nodes.iter().enumerate() {
            for c in 0..2 {
                let v: f64 = (0..3).map(|r| b0[k][r][c] * state.s[r]).sum();
                rhs[2 * nk + c] += v * area;
            }
        }
        for (l, &nl) in d.support_nodes.iter().enumerate() {
            // C B0_l, reused across k
            let mut cb = [[0.0; 2]; 3];
            for r in 0..3 {
                for c in 0..2 {
                    cb[r][c] = (0..3).map(|m| state.c_tan[r][m] * b0[l][m][c]).sum();
                }
            }
            let sb = [
                s_mat[0][0] * d.bbar[l][0] + s_mat[0][1] * d.bbar[l][1],
                s_mat[1][0] * d.bbar[l][0] + s_mat[1][1] * d.bbar[l][1],
            ];
            for (k, &nk) in d.support_nodes.iter().enumerate() {
                let geo = (d.bbar[k][0] * sb[0] + d.bbar[k][1] * sb[1]) * area;
                for i in 0..2 {
                    for j in 0..2 {
                        let mut v = (0..3).map(|r| b0[k][r][i] * cb[r][j]).sum::<f64>() * area;
                        if i == j {
                            v += geo;
                        }
                        triplets.push((2 * nk + i, 2 * nl + j, v));
                    }
                }
            }
        }
    }
    for (dof, f_ext) in external.iter().enumerate() {
        rhs[dof] -= f_ext;
    }
    Ok(GlobalSystem { n, triplets, rhs, constrained: constraints.to_vec() })
}

/// Assemble the phase-field tangent and residual at state (u, phi) given the
/// last accepted field phi_n. The driving energy psi0 comes from the current
/// smoothed deformation, undegraded. The linear-variant system carries the
/// elastic-threshold constant in the residual and no phi-proportional
/// surface term in the tangent.
pub fn assemble_phase(
    mesh: &TriMesh,
    domains: &[SmoothingDomain],
    u: &[f64],
    phi: &[f64],
    phi_n: &[f64],
    dt: f64,
    model: &CrackModel,
    material: &MaterialModel,
) -> Result<GlobalSystem, AssemblyError> {
    assert!(dt > 0.0, "phase assembly needs a positive time step, got {dt}");
    let n = mesh.nodes.len();
    let mut triplets = Vec::with_capacity(domains.len() * 16);
    let mut rhs = vec![0.0; n];
    let visc = model.eta / dt;
    for d in domains {
        let kin = smoothed_deformation(d, u);
        if !(kin.jbar > 0.0 && kin.jbar.is_finite()) {
            return Err(AssemblyError::Inverted { domain: d.edge_id, jbar: kin.jbar });
        }
        let psi0 = strain_energy_c(&kin.cbar, material)?;
        let phibar = d.average(phi);
        let dphibar = phibar - d.average(phi_n);
        let grad = d.gradient(phi);
        let gc = model.gc_for(d.region_tag);
        let (k_grad, mass, f_point) = match model.variant {
            CrackVariant::At2 => (
                gc * model.l0,
                2.0 * psi0 + gc / model.l0 + visc,
                -2.0 * (1.0 - phibar) * psi0 + gc / model.l0 * phibar + visc * dphibar,
            ),
            CrackVariant::At1 => (
                0.75 * gc * model.l0,
                2.0 * psi0 + visc,
                0.375 * gc / model.l0 - 2.0 * (1.0 - phibar) * psi0 + visc * dphibar,
            ),
        };
        let area = d.area;
        for (k, &nk) in d.support_nodes.iter().enumerate() {
            let bg = d.bbar[k][0] * grad[0] + d.bbar[k][1] * grad[1];
            rhs[nk] += (k_grad * bg + d.nbar[k] * f_point) * area;
            for (l, &nl) in d.support_nodes.iter().enumerate() {
                let bb = d.bbar[k][0] * d.bbar[l][0] + d.bbar[k][1] * d.bbar[l][1];
                triplets.push((nk, nl, (k_grad * bb + mass * d.nbar[k] * d.nbar[l]) * area));
            }
        }
    }
    Ok(GlobalSystem { n, triplets, rhs, constrained: Vec::new() })
}

/// Total (degraded) strain energy over all domains.
pub fn total_strain_energy(
    domains: &[SmoothingDomain],
    u: &[f64],
    phi: &[f64],
    material: &MaterialModel,
) -> Result<f64, AssemblyError> {
    let mut total = 0.0;
    for d in domains {
        let kin = smoothed_deformation(d, u);
        if !(kin.jbar > 0.0 && kin.jbar.is_finite()) {
            return Err(AssemblyError::Inverted { domain: d.edge_id, jbar: kin.jbar });
        }
        let psi0 = strain_energy_c(&kin.cbar, material)?;
        total += material.degradation(d.average(phi)) * psi0 * d.area;
    }
    Ok(total)
}

/// Sum of residual entries (internal forces) over a node group in one
/// component: the force the supports exert to hold the constrained group,
/// per unit thickness. Valid at a converged state.
pub fn reaction_force(
    system: &GlobalSystem,
    mesh: &TriMesh,
    group: &str,
    component: usize,
) -> Result<f64, AssemblyError> {
    let nodes = mesh.group_nodes(group);
    if nodes.is_empty() {
        return Err(AssemblyError::UnknownGroup(group.to_string()));
    }
    Ok(nodes.iter().map(|&n| system.rhs[2 * n + component]).sum())
}
