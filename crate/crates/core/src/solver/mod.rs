//! Load stepping with the staggered two-field Newton scheme: full Newton on
//! displacements with the phase field frozen, an exact active-set solve of
//! the convex phase subproblem, adaptive increment control with rollback,
//! and mesh adaptation after step acceptance.

mod linear;
mod run;
mod stepping;

pub use linear::linear_solve;
pub use run::{
    run_simulation, AdaptivityConfig, RunOutcome, Simulation, StepRecord, StopReason,
};
pub use stepping::{
    newton_update_phi, newton_update_u, staggered_step, PhaseUpdate, Problem, State, StepResult,
};

use serde::{Deserialize, Serialize};

use crate::assembly::AssemblyError;
use crate::mesh::MeshError;

/// Recoverable causes: the step is rolled back and retried at a smaller
/// increment.
#[derive(Debug, thiserror::Error)]
pub enum RejectReason {
    #[error("inverted configuration on domain {domain} (det F = {jbar})")]
    Inverted { domain: usize, jbar: f64 },
    #[error("displacement Newton diverged after {0} iterations")]
    Diverged(usize),
    #[error("displacement Newton hit the iteration cap {0}")]
    NewtonMaxed(usize),
    #[error("staggered loop hit the iteration cap {0}")]
    StaggeredMaxed(usize),
    #[error("linear solve failed: {0}")]
    Singular(String),
    #[error("phase increment {0} exceeded the step target")]
    PhaseIncrementTooLarge(f64),
}

#[derive(Debug, thiserror::Error)]
pub enum SolverError {
    #[error("step rejected: {0}")]
    Reject(RejectReason),
    #[error("load increment underflow at load {load}: {increment} below minimum {min} ({cause})")]
    IncrementUnderflow { load: f64, increment: f64, min: f64, cause: String },
    #[error("invalid solver setup: {0}")]
    Setup(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
}

/// Assembly failures at a trial state mean the state is inadmissible, which
/// is a step-rejection signal; configuration mistakes abort instead.
pub(crate) fn classify(err: AssemblyError) -> SolverError {
    match err {
        AssemblyError::Inverted { domain, jbar } => {
            SolverError::Reject(RejectReason::Inverted { domain, jbar })
        }
        AssemblyError::Material(e) => SolverError::Reject(RejectReason::Singular(e.to_string())),
        e @ (AssemblyError::ConflictingConstraint { .. } | AssemblyError::UnknownGroup(_)) => {
            SolverError::Setup(e.to_string())
        }
    }
}

/// Newton/staggered iteration controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Staggered convergence threshold on residual ratios.
    pub staggered_tol: f64,
    pub max_staggered: usize,
    pub max_newton: usize,
    /// Largest admissible nodal phase increment per step; beyond it the step
    /// is redone smaller.
    pub dphi_max: f64,
    pub growth: f64,
    pub shrink: f64,
    /// Relative residual contract of the linear solver.
    pub linear_tol: f64,
    /// Reference-norm floor guarding the ratio tests at unloaded states.
    pub residual_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            staggered_tol: 1e-4,
            max_staggered: 200,
            max_newton: 30,
            dphi_max: 0.2,
            growth: 1.5,
            shrink: 0.5,
            linear_tol: 1e-10,
            residual_floor: 1e-14,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.staggered_tol > 0.0) {
            return Err(SolverError::Setup("staggered tolerance must be positive".into()));
        }
        if !(self.shrink < 1.0 && 1.0 < self.growth) {
            return Err(SolverError::Setup(format!(
                "step factors must satisfy shrink < 1 < growth, got {} and {}",
                self.shrink, self.growth
            )));
        }
        if !(self.dphi_max > 0.0) {
            return Err(SolverError::Setup("phase increment target must be positive".into()));
        }
        if self.max_staggered == 0 || self.max_newton == 0 {
            return Err(SolverError::Setup("iteration caps must be at least one".into()));
        }
        Ok(())
    }
}

/// Prescribed-displacement schedule. The load factor multiplies the boundary
/// condition values, so with unit values it is the applied displacement in
/// mm; time advances as increment / rate.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadSchedule {
    pub load: f64,
    pub increment: f64,
    pub min_increment: f64,
    pub max_increment: f64,
    pub target: f64,
    /// Loading rate (load units per second) converting increments to time
    /// steps for the viscous term.
    pub rate: f64,
    pub time: f64,
}

impl LoadSchedule {
    pub fn new(increment: f64, target: f64) -> Self {
        LoadSchedule {
            load: 0.0,
            increment,
            min_increment: increment * 1e-6,
            max_increment: increment,
            target,
            rate: 1.0,
            time: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.increment > 0.0 && self.target > 0.0 && self.rate > 0.0) {
            return Err(SolverError::Setup(
                "load increment, target, and rate must be positive".into(),
            ));
        }
        if !(self.min_increment <= self.increment && self.increment <= self.max_increment) {
            return Err(SolverError::Setup(format!(
                "increment {} outside bounds [{}, {}]",
                self.increment, self.min_increment, self.max_increment
            )));
        }
        Ok(())
    }
}
