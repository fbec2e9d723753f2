//! 2D finite-strain phase-field fracture on edge-based smoothed finite
//! elements (ES-FEM) with multi-level adaptive mesh refinement.
//!
//! The library is organized along the solver pipeline: [`mesh`] builds and
//! adapts T3 triangulations, [`smoothing`] turns edges into strain-smoothing
//! domains, [`constitutive`] and [`phasefield`] provide the pointwise models,
//! [`assembly`] builds the global staggered systems, [`solver`] runs the
//! load-stepping scheme, and [`scenario`]/[`io`] handle configuration and
//! file formats for the `esfrac` CLI.

pub mod tensor;

pub mod assembly;
pub mod bench;
pub mod constitutive;
pub mod io;
pub mod mesh;
pub mod phasefield;
pub mod scenario;
pub mod smoothing;
pub mod solver;
