//! Load-stepping driver: adaptive increments with rollback on rejection,
//! refinement and coarsening after step acceptance, and per-step reporting.

use std::collections::HashSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::BoundaryConditions;
use crate::constitutive::MaterialModel;
use crate::mesh::{
    coarsen, mark_for_refinement, odt_smooth, refine, transfer_fields, FieldRef, NodeOrigin,
    TransferRecord, TriMesh,
};
use crate::phasefield::CrackModel;
use crate::smoothing::build_smoothing_domains;

use super::stepping::{staggered_step, Problem, State};
use super::{LoadSchedule, SolverConfig, SolverError};

/// Phase-driven mesh adaptation: elements with a node at or above
/// `refine_threshold` split until `max_level`; sibling pairs entirely below
/// `coarsen_threshold` merge back.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptivityConfig {
    pub enabled: bool,
    pub refine_threshold: f64,
    pub coarsen_threshold: f64,
    pub max_level: u32,
}

impl Default for AdaptivityConfig {
    fn default() -> Self {
        AdaptivityConfig {
            enabled: true,
            refine_threshold: 0.25,
            coarsen_threshold: 0.05,
            max_level: 4,
        }
    }
}

/// A complete quasi-static problem: mesh, material and crack models,
/// boundary conditions, load schedule, solver and adaptivity settings, and
/// the probe group whose reaction is reported.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub mesh: TriMesh,
    pub material: MaterialModel,
    pub crack: CrackModel,
    pub bcs: BoundaryConditions,
    pub loading: LoadSchedule,
    pub config: SolverConfig,
    pub adaptivity: AdaptivityConfig,
    pub reaction_group: String,
    pub reaction_component: usize,
    /// Multiplies the reported reaction force; 2 restores the full specimen
    /// cross-section from a symmetric half model. Displacements are always
    /// reported as applied.
    pub report_scale: f64,
}

/// One accepted load step, recorded after mesh adaptation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub time_s: f64,
    pub load_factor: f64,
    /// Applied boundary displacement.
    pub displacement_mm: f64,
    /// Probe-group reaction times the report scale, per unit thickness.
    pub force_n_per_mm: f64,
    pub elements: usize,
    pub nodes: usize,
    /// Smoothing domains (one per edge) on the current mesh.
    pub domains: usize,
    pub strain_energy: f64,
    pub surface_energy: f64,
    /// Fraction of the surface energy sitting in tagged interface regions;
    /// zero on meshes without interfaces.
    pub interface_energy_share: f64,
    /// Cumulative viscous dissipation up to this step.
    pub dissipation: f64,
    pub dissipation_rate: f64,
    pub staggered_iters: usize,
    pub newton_iters: usize,
    /// Largest pass count of a single phase active-set solve in the step.
    pub max_phase_passes: usize,
    pub max_dphi: f64,
    /// Wall time since the previous accepted step, rejected attempts
    /// included.
    pub wall_ms: u64,
}

/// Why a run ended without an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// The load schedule reached its target.
    TargetReached,
    /// The reaction collapsed below one percent of its running peak.
    FullFracture,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub stop: StopReason,
    pub records: Vec<StepRecord>,
    pub state: State,
    pub peak_force: f64,
}

/// Reaction magnitude under this fraction of the running peak means the
/// specimen has failed and the run stops.
const FRACTURE_CUTOFF: f64 = 0.01;

/// Drive the load schedule to its target, or until full fracture. Rejected
/// steps roll the state back and halve the increment; calm steps grow it.
/// `on_step` fires after each accepted step, post-adaptation, with the
/// record, the current mesh, and the current fields.
pub fn run_simulation<F>(sim: &mut Simulation, mut on_step: F) -> Result<RunOutcome, SolverError>
where
    F: FnMut(&StepRecord, &TriMesh, &State),
{
    sim.config.validate()?;
    sim.loading.validate()?;
    if !(sim.report_scale > 0.0 && sim.report_scale.is_finite()) {
        return Err(SolverError::Setup(format!(
            "report scale must be positive, got {}",
            sim.report_scale
        )));
    }
    let mut domains = build_smoothing_domains(&sim.mesh)?;
    let mut state = State::zeros(sim.mesh.nodes.len());
    let mut records = Vec::new();
    let mut dissipation = 0.0;
    let mut peak = 0.0f64;
    let mut step = 0usize;
    let mut stop = StopReason::TargetReached;
    let mut clock = Instant::now();
    while sim.loading.load < sim.loading.target * (1.0 - 1e-12) {
        let next = (sim.loading.load + sim.loading.increment).min(sim.loading.target);
        let dt = (next - sim.loading.load) / sim.loading.rate;
        let snapshot = state.clone();
        let p = Problem {
            mesh: &sim.mesh,
            domains: &domains,
            material: &sim.material,
            crack: &sim.crack,
        };
        let reaction_at = (sim.reaction_group.as_str(), sim.reaction_component);
        let result = match staggered_step(&p, &mut state, &sim.bcs, reaction_at, next, dt, &sim.config)
        {
            Ok(r) => r,
            Err(SolverError::Reject(reason)) => {
                state = snapshot;
                let smaller = sim.loading.increment * sim.config.shrink;
                if smaller < sim.loading.min_increment {
                    return Err(SolverError::IncrementUnderflow {
                        load: sim.loading.load,
                        increment: smaller,
                        min: sim.loading.min_increment,
                        cause: reason.to_string(),
                    });
                }
                sim.loading.increment = smaller;
                continue;
            }
            Err(other) => return Err(other),
        };

        step += 1;
        sim.loading.load = next;
        sim.loading.time += dt;
        state.phi_n.copy_from_slice(&state.phi);
        dissipation += result.dissipation_rate * dt;
        peak = peak.max(result.reaction.abs());
        if result.max_dphi < 0.1 * sim.config.dphi_max {
            sim.loading.increment =
                (sim.loading.increment * sim.config.growth).min(sim.loading.max_increment);
        }
        if sim.adaptivity.enabled && adapt_state(&mut sim.mesh, &mut state, &sim.adaptivity)? {
            domains = build_smoothing_domains(&sim.mesh)?;
        }

        let (bulk_energy, interface_energy) =
            crate::phasefield::surface_energy_split(&domains, &state.phi, &sim.crack);
        let split_total = bulk_energy + interface_energy;
        let record = StepRecord {
            step,
            time_s: sim.loading.time,
            load_factor: sim.loading.load,
            displacement_mm: sim.loading.load,
            force_n_per_mm: sim.report_scale * result.reaction,
            elements: sim.mesh.elements.len(),
            nodes: sim.mesh.nodes.len(),
            domains: domains.len(),
            strain_energy: result.strain_energy,
            surface_energy: result.surface_energy,
            interface_energy_share: if split_total > 0.0 {
                interface_energy / split_total
            } else {
                0.0
            },
            dissipation,
            dissipation_rate: result.dissipation_rate,
            staggered_iters: result.staggered_iters,
            newton_iters: result.newton_iters,
            max_phase_passes: result.max_phase_passes,
            max_dphi: result.max_dphi,
            wall_ms: clock.elapsed().as_millis() as u64,
        };
        clock = Instant::now();
        on_step(&record, &sim.mesh, &state);
        records.push(record);

        if result.reaction.abs() < FRACTURE_CUTOFF * peak {
            stop = StopReason::FullFracture;
            break;
        }
    }
    Ok(RunOutcome { stop, records, state, peak_force: peak })
}

/// One adaptation round after an accepted step: refine around high phase
/// values, relax fresh interior nodes, then merge fully relaxed siblings.
/// Fields move with the mesh. Returns whether the mesh changed.
fn adapt_state(
    mesh: &mut TriMesh,
    state: &mut State,
    cfg: &AdaptivityConfig,
) -> Result<bool, SolverError> {
    let mut changed = false;
    let marked = mark_for_refinement(mesh, &state.phi, cfg.refine_threshold, cfg.max_level);
    if !marked.is_empty() {
        let (refined, record) = refine(mesh, &marked)?;
        apply_transfer(state, &record)?;
        *mesh = refined;
        changed = true;
        // only fresh midpoints may move; prior nodes and material interfaces
        // stay put
        let mut protected: HashSet<usize> = record
            .origins
            .iter()
            .enumerate()
            .filter(|(_, origin)| matches!(origin, NodeOrigin::Existing(_)))
            .map(|(i, _)| i)
            .collect();
        for (i, node) in mesh.nodes.iter().enumerate() {
            if node.region_tag != 0 {
                protected.insert(i);
            }
        }
        *mesh = odt_smooth(mesh, &protected);
    }
    let (merged, record) = coarsen(mesh, &state.phi, cfg.coarsen_threshold)?;
    if merged.elements.len() != mesh.elements.len() {
        apply_transfer(state, &record)?;
        *mesh = merged;
        changed = true;
    }
    Ok(changed)
}

fn apply_transfer(state: &mut State, record: &TransferRecord) -> Result<(), SolverError> {
    let moved = transfer_fields(
        record,
        &[
            FieldRef { data: &state.u, stride: 2, clamp01: false },
            FieldRef { data: &state.phi, stride: 1, clamp01: true },
            FieldRef { data: &state.phi_n, stride: 1, clamp01: true },
        ],
    )?;
    let mut moved = moved.into_iter();
    state.u = moved.next().expect("three fields in, three out");
    state.phi = moved.next().expect("three fields in, three out");
    state.phi_n = moved.next().expect("three fields in, three out");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::DirichletSpec;
    use crate::mesh::rect_structured;
    use crate::phasefield::CrackVariant;

    fn pull_sim(nx: usize, ny: usize, increment: f64, target: f64) -> Simulation {
        Simulation {
            mesh: rect_structured(1.0, 1.0, nx, ny, [0.0, 0.0]).unwrap(),
            material: MaterialModel::nu_form(1.0, 0.3, 1e-8).unwrap(),
            crack: CrackModel::new(CrackVariant::At2, 0.5, 1.0, None, 1e-3).unwrap(),
            bcs: BoundaryConditions {
                dirichlet: vec![
                    DirichletSpec { group: "bottom".into(), components: [None, Some(0.0)] },
                    DirichletSpec { group: "left".into(), components: [Some(0.0), None] },
                    DirichletSpec { group: "top".into(), components: [None, Some(1.0)] },
                ],
                tractions: vec![],
            },
            loading: LoadSchedule::new(increment, target),
            config: SolverConfig::default(),
            adaptivity: AdaptivityConfig { enabled: false, ..AdaptivityConfig::default() },
            reaction_group: "top".into(),
            reaction_component: 1,
            report_scale: 1.0,
        }
    }

    #[test]
    fn run_reaches_the_target_and_reports_every_step() {
        let mut sim = pull_sim(2, 2, 0.0125, 0.05);
        let mut calls = 0usize;
        let out = run_simulation(&mut sim, |record, mesh, state| {
            calls += 1;
            assert_eq!(record.nodes, mesh.nodes.len());
            assert_eq!(state.phi.len(), mesh.nodes.len());
        })
        .unwrap();
        assert_eq!(out.stop, StopReason::TargetReached);
        assert_eq!(calls, out.records.len());
        assert!(!out.records.is_empty());
        let last = out.records.last().unwrap();
        assert!((last.displacement_mm - 0.05).abs() < 1e-12);
        for pair in out.records.windows(2) {
            assert!(pair[1].displacement_mm > pair[0].displacement_mm);
            assert!(pair[1].dissipation >= pair[0].dissipation);
            assert!(pair[1].force_n_per_mm > 0.0);
        }
        // unit rate makes time track the applied displacement
        for record in &out.records {
            assert!((record.time_s - record.displacement_mm).abs() < 1e-12);
        }
        assert!(out.peak_force > 0.0);
    }

    #[test]
    fn calm_steps_grow_the_increment_up_to_the_cap() {
        let mut sim = pull_sim(1, 1, 0.005, 0.06);
        sim.loading.max_increment = 0.02;
        let out = run_simulation(&mut sim, |_, _, _| {}).unwrap();
        let mut deltas = Vec::new();
        let mut prev = 0.0;
        for record in &out.records {
            deltas.push(record.displacement_mm - prev);
            prev = record.displacement_mm;
        }
        assert!(deltas.iter().all(|&d| d <= 0.02 + 1e-12));
        assert!(
            deltas.iter().any(|&d| d > 0.005 + 1e-12),
            "increments never grew: {deltas:?}"
        );
    }

    #[test]
    fn persistent_rejection_underflows_the_increment() {
        let mut sim = pull_sim(1, 1, 0.25, 0.5);
        // any phase motion at all rejects the step
        sim.config.dphi_max = 1e-12;
        sim.loading.min_increment = 0.05;
        let err = run_simulation(&mut sim, |_, _, _| {}).unwrap_err();
        assert!(matches!(err, SolverError::IncrementUnderflow { .. }), "got {err:?}");
    }

    #[test]
    fn runs_are_deterministic() {
        let outputs: Vec<Vec<(f64, f64, f64)>> = (0..2)
            .map(|_| {
                let mut sim = pull_sim(2, 2, 0.02, 0.04);
                run_simulation(&mut sim, |_, _, _| {})
                    .unwrap()
                    .records
                    .iter()
                    .map(|r| (r.force_n_per_mm, r.strain_energy, r.surface_energy))
                    .collect()
            })
            .collect();
        assert_eq!(outputs[0], outputs[1]);
    }

    #[test]
    fn adaptation_refines_hot_regions_and_keeps_fields_consistent() {
        let mut mesh = rect_structured(1.0, 1.0, 2, 2, [0.0, 0.0]).unwrap();
        let mut state = State::zeros(mesh.nodes.len());
        for (i, node) in mesh.nodes.iter().enumerate() {
            if node.x[0] < 0.3 && node.x[1] < 0.3 {
                state.phi[i] = 0.9;
                state.phi_n[i] = 0.9;
            }
            state.u[2 * i] = 0.1 * node.x[0];
            state.u[2 * i + 1] = -0.05 * node.x[1];
        }
        let cfg = AdaptivityConfig { max_level: 2, ..AdaptivityConfig::default() };
        let before = mesh.elements.len();
        let changed = adapt_state(&mut mesh, &mut state, &cfg).unwrap();
        assert!(changed);
        assert!(mesh.elements.len() > before);
        assert_eq!(state.phi.len(), mesh.nodes.len());
        assert_eq!(state.phi_n.len(), mesh.nodes.len());
        assert_eq!(state.u.len(), 2 * mesh.nodes.len());
        assert!(mesh.level_histogram().keys().any(|&level| level > 0));
        assert!((mesh.total_area() - 1.0).abs() < 1e-12);
        assert!(mesh.min_angle_deg() > 10.0);
        let max_phi = state.phi.iter().cloned().fold(0.0f64, f64::max);
        assert!(max_phi >= 0.9 - 1e-12, "hot region must survive the transfer");
        assert!(state.phi.iter().all(|&p| (0.0..=1.0).contains(&p)));
    }
}
