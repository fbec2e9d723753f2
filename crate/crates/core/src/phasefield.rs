//! Crack-density functionals (AT1/AT2 regularizations), the phase-field
//! driving force, viscous dissipation, and the active-set partition used to
//! enforce irreversibility.

use serde::{Deserialize, Serialize};

use crate::smoothing::SmoothingDomain;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrackVariant {
    /// Linear-in-phi density with an elastic threshold: gamma = (3/8)(phi/l0
    /// + l0 |grad phi|^2).
    At1,
    /// Quadratic density, damage from the first load increment: gamma =
    /// (1/2)(phi^2/l0 + l0 |grad phi|^2).
    At2,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum CrackModelError {
    #[error("{name} must be positive, got {value}")]
    NotPositive { name: &'static str, value: f64 },
    #[error("viscosity must be non-negative, got {0}")]
    NegativeViscosity(f64),
}

/// Regularized fracture model: variant, length scale, fracture energies per
/// material region, and the viscous regularization coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct CrackModel {
    pub variant: CrackVariant,
    /// Regularization length (mm).
    pub l0: f64,
    /// Fracture energy of the bulk, region tag 0 (N/mm).
    pub gc_bulk: f64,
    /// Fracture energy of non-bulk regions (weak interfaces), if different.
    pub gc_interface: Option<f64>,
    /// Viscosity (N s/mm^2); zero restores rate independence.
    pub eta: f64,
}

impl CrackModel {
    pub fn new(
        variant: CrackVariant,
        l0: f64,
        gc_bulk: f64,
        gc_interface: Option<f64>,
        eta: f64,
    ) -> Result<Self, CrackModelError> {
        let positive = |name: &'static str, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(CrackModelError::NotPositive { name, value })
            }
        };
        positive("l0", l0)?;
        positive("gc_bulk", gc_bulk)?;
        if let Some(gci) = gc_interface {
            positive("gc_interface", gci)?;
        }
        if !(eta >= 0.0) || !eta.is_finite() {
            return Err(CrackModelError::NegativeViscosity(eta));
        }
        Ok(CrackModel { variant, l0, gc_bulk, gc_interface, eta })
    }

    /// Fracture energy for a material region tag.
    pub fn gc_for(&self, region_tag: u16) -> f64 {
        if region_tag == 0 {
            self.gc_bulk
        } else {
            self.gc_interface.unwrap_or(self.gc_bulk)
        }
    }
}

/// Crack surface density per unit area for the model's variant.
pub fn crack_density(phi: f64, grad_phi: [f64; 2], model: &CrackModel) -> f64 {
    let g2 = grad_phi[0] * grad_phi[0] + grad_phi[1] * grad_phi[1];
    match model.variant {
        CrackVariant::At1 => 0.375 * (phi / model.l0 + model.l0 * g2),
        CrackVariant::At2 => 0.5 * (phi * phi / model.l0 + model.l0 * g2),
    }
}

/// Regularized crack surface energy: sum over smoothing domains of
/// Gc(region) * gamma(phi_bar, grad phi_bar) * area.
pub fn surface_energy(domains: &[SmoothingDomain], phi: &[f64], model: &CrackModel) -> f64 {
    domains
        .iter()
        .map(|d| {
            model.gc_for(d.region_tag)
                * crack_density(d.average(phi), d.gradient(phi), model)
                * d.area
        })
        .sum()
}

/// Surface energy split into (bulk, interface) parts by region tag; the
/// second entry is the share carried by tagged (non-bulk) domains.
pub fn surface_energy_split(
    domains: &[SmoothingDomain],
    phi: &[f64],
    model: &CrackModel,
) -> (f64, f64) {
    let mut bulk = 0.0;
    let mut interface = 0.0;
    for d in domains {
        let e = model.gc_for(d.region_tag)
            * crack_density(d.average(phi), d.gradient(phi), model)
            * d.area;
        if d.region_tag == 0 {
            bulk += e;
        } else {
            interface += e;
        }
    }
    (bulk, interface)
}

/// Crack driving force 2 (1 - phi) psi0 from the undegraded strain energy.
pub fn driving_force(psi0: f64, phi: f64) -> f64 {
    2.0 * (1.0 - phi) * psi0
}

/// Viscous dissipation rate of the current increment: (eta/2) sum over
/// domains of ((phi_bar - phi_bar_n)/dt)^2 * area. Diagnostic only.
pub fn dissipation_increment(
    domains: &[SmoothingDomain],
    phi: &[f64],
    phi_n: &[f64],
    dt: f64,
    eta: f64,
) -> f64 {
    assert!(dt > 0.0, "dissipation needs a positive time step, got {dt}");
    domains
        .iter()
        .map(|d| {
            let rate = (d.average(phi) - d.average(phi_n)) / dt;
            0.5 * eta * rate * rate * d.area
        })
        .sum()
}

/// Indices with a negative increment (to be frozen at zero) and their
/// complement. Zero increments count as inactive.
pub fn active_set_partition(dphi: &[f64]) -> (Vec<usize>, Vec<usize>) {
    let (active, inactive): (Vec<usize>, Vec<usize>) =
        (0..dphi.len()).partition(|&i| dphi[i] < 0.0);
    (active, inactive)
}
