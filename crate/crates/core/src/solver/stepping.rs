//! One load step: Newton on the displacement field at frozen phase, an exact
//! active-set solve of the convex phase subproblem at frozen displacements,
//! alternated until both residual ratios fall under the staggered tolerance.

use std::collections::BTreeSet;

use crate::assembly::{
    assemble_displacement, assemble_phase, reaction_force, total_strain_energy,
    BoundaryConditions, GlobalSystem,
};
use crate::constitutive::MaterialModel;
use crate::mesh::TriMesh;
use crate::phasefield::{dissipation_increment, surface_energy, CrackModel};
use crate::smoothing::SmoothingDomain;

use super::linear::linear_solve;
use super::{classify, RejectReason, SolverConfig, SolverError};

/// Discretization and material data shared by every solve of one step.
#[derive(Clone, Copy)]
pub struct Problem<'a> {
    pub mesh: &'a TriMesh,
    pub domains: &'a [SmoothingDomain],
    pub material: &'a MaterialModel,
    pub crack: &'a CrackModel,
}

/// Solution fields: the current iterate (u, phi) and the last accepted phase
/// field phi_n, the lower bound of the irreversibility constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u: Vec<f64>,
    pub phi: Vec<f64>,
    pub phi_n: Vec<f64>,
}

impl State {
    pub fn zeros(n_nodes: usize) -> Self {
        State {
            u: vec![0.0; 2 * n_nodes],
            phi: vec![0.0; n_nodes],
            phi_n: vec![0.0; n_nodes],
        }
    }
}

/// Converged-step summary used for step control and reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub staggered_iters: usize,
    /// Linear solves spent in the displacement Newton loops.
    pub newton_iters: usize,
    /// Linear solves spent in the phase active-set loops.
    pub phase_passes: usize,
    /// Largest pass count of a single phase active-set solve.
    pub max_phase_passes: usize,
    /// Largest nodal phase change against phi_n.
    pub max_dphi: f64,
    pub reaction: f64,
    pub strain_energy: f64,
    pub surface_energy: f64,
    pub dissipation_rate: f64,
}

/// Outcome of one phase subproblem solve.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseUpdate {
    /// Active-set passes taken; zero when the entry state was already
    /// optimal.
    pub passes: usize,
    /// Largest nodal phase change against phi_n after the commit.
    pub max_dphi: f64,
    /// Projected residual norm at entry, the staggered measure for the phase
    /// equation.
    pub entry_residual: f64,
}

fn free_norm(system: &GlobalSystem) -> f64 {
    let mut constrained = vec![false; system.n];
    for &(dof, _) in &system.constrained {
        constrained[dof] = true;
    }
    system
        .rhs
        .iter()
        .zip(&constrained)
        .filter(|&(_, &held)| !held)
        .map(|(v, _)| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Residual ratio for the convergence tests; norms at the floor count as
/// converged regardless of the reference.
fn ratio(res: f64, reference: f64, floor: f64) -> f64 {
    if res <= floor {
        0.0
    } else {
        res / reference.max(floor)
    }
}

/// Newton iteration on the displacement field at frozen phase. The boundary
/// increments are imposed on u up front; every Newton solve then holds the
/// constrained dofs fixed. Returns the free-residual history, one entry per
/// assembly. The first residual of the step (boundary moved, interior not
/// yet equilibrated) becomes the step reference norm; it scales linearly
/// with the increment, so the staggered ratios stay meaningful however
/// small the step.
pub fn newton_update_u(
    p: &Problem<'_>,
    u: &mut [f64],
    phi: &[f64],
    external: &[f64],
    increments: &[(usize, f64)],
    step_ref: &mut Option<f64>,
    config: &SolverConfig,
) -> Result<Vec<f64>, SolverError> {
    for &(dof, delta) in increments {
        u[dof] += delta;
    }
    let held: Vec<(usize, f64)> = increments.iter().map(|&(dof, _)| (dof, 0.0)).collect();
    let mut history: Vec<f64> = Vec::new();
    let mut rises = 0usize;
    for iter in 0..=config.max_newton {
        let system = assemble_displacement(p.mesh, p.domains, u, phi, p.material, external, &held)
            .map_err(classify)?;
        let res = free_norm(&system);
        if !res.is_finite() {
            return Err(SolverError::Reject(RejectReason::Diverged(iter)));
        }
        if step_ref.is_none() {
            *step_ref = Some(res);
        }
        history.push(res);
        if ratio(res, step_ref.expect("set above"), config.residual_floor) < config.staggered_tol
        {
            return Ok(history);
        }
        if iter == config.max_newton {
            return Err(SolverError::Reject(RejectReason::NewtonMaxed(iter)));
        }
        if history.len() >= 2 && res > history[history.len() - 2] {
            rises += 1;
            if rises >= 3 {
                return Err(SolverError::Reject(RejectReason::Diverged(iter)));
            }
        } else {
            rises = 0;
        }
        let d = linear_solve(&system, config.linear_tol)?;
        for (ui, di) in u.iter_mut().zip(&d) {
            *ui += di;
        }
    }
    unreachable!("the loop exits through convergence, rejection, or the cap")
}

/// Exact solve of the phase subproblem at frozen displacements, constrained
/// to phi_n <= phi <= 1. The residual is affine in phi with a constant
/// tangent, so each pass is one constrained solve of the full subproblem.
/// The active bound sets follow the primal-dual update: free dofs pushed
/// past a bound are pinned onto it, pinned dofs whose multiplier (the
/// residual left at the pin) points off the bound are released, and the
/// committed iterate, reached when the sets settle, is the exact constrained
/// optimum.
pub fn newton_update_phi(
    p: &Problem<'_>,
    phi: &mut [f64],
    u: &[f64],
    phi_n: &[f64],
    dt: f64,
    step_ref: &mut Option<f64>,
    config: &SolverConfig,
) -> Result<PhaseUpdate, SolverError> {
    let mut system = assemble_phase(p.mesh, p.domains, u, phi, phi_n, dt, p.crack, p.material)
        .map_err(classify)?;
    // bounds on the increment keeping phi_n <= phi + d <= 1
    let lower: Vec<f64> = phi_n.iter().zip(phi.iter()).map(|(pn, ph)| pn - ph).collect();
    let upper: Vec<f64> = phi.iter().map(|ph| 1.0 - ph).collect();
    let pinned_tol = 1e-12;
    // a pinned dof pushing into its bound is optimal there and does not count
    let entry_residual = phi
        .iter()
        .zip(phi_n)
        .zip(&system.rhs)
        .map(|((ph, pn), f)| {
            let held_low = *ph <= pn + pinned_tol && *f > 0.0;
            let held_high = *ph >= 1.0 - pinned_tol && *f < 0.0;
            let r = if held_low || held_high { 0.0 } else { *f };
            r * r
        })
        .sum::<f64>()
        .sqrt();
    if step_ref.is_none() {
        *step_ref = Some(entry_residual);
    }
    let max_dphi =
        |phi: &[f64]| phi.iter().zip(phi_n).map(|(ph, pn)| ph - pn).fold(0.0f64, f64::max);
    if entry_residual <= config.residual_floor {
        return Ok(PhaseUpdate { passes: 0, max_dphi: max_dphi(phi), entry_residual });
    }
    let mut lo: BTreeSet<usize> = BTreeSet::new();
    let mut hi: BTreeSet<usize> = BTreeSet::new();
    for pass in 1..=100 {
        system.constrained = lo
            .iter()
            .map(|&i| (i, lower[i]))
            .chain(hi.iter().map(|&i| (i, upper[i])))
            .collect();
        let d = linear_solve(&system, config.linear_tol)?;
        // multiplier at pinned dofs: the residual the pin holds back
        let mut g = system.rhs.clone();
        for &(r, c, v) in &system.triplets {
            g[r] += v * d[c];
        }
        let next_lo: BTreeSet<usize> = (0..d.len())
            .filter(|&i| if lo.contains(&i) { g[i] > 0.0 } else { d[i] < lower[i] })
            .collect();
        let next_hi: BTreeSet<usize> = (0..d.len())
            .filter(|&i| {
                !next_lo.contains(&i) && if hi.contains(&i) { g[i] < 0.0 } else { d[i] > upper[i] }
            })
            .collect();
        if next_lo == lo && next_hi == hi {
            for (ph, di) in phi.iter_mut().zip(&d) {
                *ph = (*ph + di).clamp(0.0, 1.0);
            }
            return Ok(PhaseUpdate { passes: pass, max_dphi: max_dphi(phi), entry_residual });
        }
        lo = next_lo;
        hi = next_hi;
    }
    Err(SolverError::Reject(RejectReason::Singular(
        "phase active set did not settle after 100 passes".into(),
    )))
}

/// One load step on a fixed mesh: alternate the displacement Newton solve
/// and the phase subproblem until both residual ratios, each measured
/// against its first-sweep reference, drop below the staggered tolerance.
/// The phase ratio uses the projected residual at entry to the phase solve;
/// the displacement ratio uses a fresh residual at the updated phase field.
pub fn staggered_step(
    p: &Problem<'_>,
    state: &mut State,
    bcs: &BoundaryConditions,
    reaction_at: (&str, usize),
    load: f64,
    dt: f64,
    config: &SolverConfig,
) -> Result<StepResult, SolverError> {
    let external = bcs.external_forces(p.mesh, load).map_err(classify)?;
    let mut ref_u: Option<f64> = None;
    let mut ref_phi: Option<f64> = None;
    let mut newton_iters = 0;
    let mut phase_passes = 0;
    let mut max_phase_passes = 0;
    for sweep in 0..config.max_staggered {
        let increments = bcs.increments(p.mesh, load, &state.u).map_err(classify)?;
        let history = newton_update_u(
            p,
            &mut state.u,
            &state.phi,
            &external,
            &increments,
            &mut ref_u,
            config,
        )?;
        newton_iters += history.len() - 1;
        let update =
            newton_update_phi(p, &mut state.phi, &state.u, &state.phi_n, dt, &mut ref_phi, config)?;
        phase_passes += update.passes;
        max_phase_passes = max_phase_passes.max(update.passes);
        if update.max_dphi > config.dphi_max {
            return Err(SolverError::Reject(RejectReason::PhaseIncrementTooLarge(
                update.max_dphi,
            )));
        }
        // displacement imbalance created by the phase update
        let held: Vec<(usize, f64)> = increments.iter().map(|&(dof, _)| (dof, 0.0)).collect();
        let post = assemble_displacement(
            p.mesh, p.domains, &state.u, &state.phi, p.material, &external, &held,
        )
        .map_err(classify)?;
        let u_ratio = ratio(free_norm(&post), ref_u.unwrap_or(0.0), config.residual_floor);
        let phi_ratio =
            ratio(update.entry_residual, ref_phi.unwrap_or(0.0), config.residual_floor);
        if u_ratio < config.staggered_tol && phi_ratio < config.staggered_tol {
            let reaction =
                reaction_force(&post, p.mesh, reaction_at.0, reaction_at.1).map_err(classify)?;
            let strain_energy = total_strain_energy(p.domains, &state.u, &state.phi, p.material)
                .map_err(classify)?;
            return Ok(StepResult {
                staggered_iters: sweep + 1,
                newton_iters,
                phase_passes,
                max_phase_passes,
                max_dphi: update.max_dphi,
                reaction,
                strain_energy,
                surface_energy: surface_energy(p.domains, &state.phi, p.crack),
                dissipation_rate: dissipation_increment(
                    p.domains,
                    &state.phi,
                    &state.phi_n,
                    dt,
                    p.crack.eta,
                ),
            });
        }
    }
    Err(SolverError::Reject(RejectReason::StaggeredMaxed(config.max_staggered)))
}
