//! Compressible Neo-Hookean hyperelasticity under plane strain: energy,
//! first/second Piola-Kirchhoff stresses, tangent modulus, and the
//! phase-field degradation of the stress-bearing terms.
//!
//! Plane strain convention: F33 = 1, so the trace term carries a constant +1
//! and J is the determinant of the in-plane 2x2 block. The volumetric
//! exponent is beta = 2 nu / (1 - nu) in the Poisson-ratio form, or
//! beta = Lambda / mu in the two-modulus form; both share one code path
//! because mu^2/Lambda = mu/beta.

use crate::tensor::{det2, inv2, transpose2, Mat2, Voigt3, Voigt33, IDENTITY};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElasticVariant {
    /// Volumetric exponent from the Poisson ratio, beta = 2 nu / (1 - nu).
    Nu { nu: f64 },
    /// Volumetric exponent from a second modulus, beta = lambda / mu.
    Lambda { lambda: f64 },
}

#[derive(Debug, Clone, Copy)]
pub struct MaterialModel {
    /// Shear modulus (N/mm^2).
    pub mu: f64,
    pub variant: ElasticVariant,
    /// Residual stiffness floor of the degradation function g = (1-phi)^2 + k.
    pub k: f64,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MaterialError {
    #[error("shear modulus must be positive, got {0}")]
    NonPositiveMu(f64),
    #[error("Poisson ratio must lie in [0, 0.5), got {0}")]
    PoissonOutOfRange(f64),
    #[error("volumetric modulus must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("degradation floor must satisfy 0 < k < 1, got {0}")]
    DegradationFloorOutOfRange(f64),
    #[error("inadmissible deformation: J = {0} <= 0")]
    NonPositiveJacobian(f64),
    #[error("phase field value {0} outside [0, 1]")]
    PhaseOutOfRange(f64),
}

/// Undamaged stress response at one material point: energy density, PK2 in
/// Voigt form, and the material tangent. `degrade` scales the stress-bearing
/// parts; `psi0` always stays undegraded because it drives the phase field.
#[derive(Debug, Clone, Copy)]
pub struct StressState {
    pub psi0: f64,
    pub s: Voigt3,
    pub c_tan: Voigt33,
}

impl MaterialModel {
    pub fn nu_form(mu: f64, nu: f64, k: f64) -> Result<Self, MaterialError> {
        if !(mu > 0.0) {
            return Err(MaterialError::NonPositiveMu(mu));
        }
        if !(0.0..0.5).contains(&nu) {
            return Err(MaterialError::PoissonOutOfRange(nu));
        }
        Self::check_floor(k)?;
        Ok(Self { mu, variant: ElasticVariant::Nu { nu }, k })
    }

    pub fn lambda_form(mu: f64, lambda: f64, k: f64) -> Result<Self, MaterialError> {
        if !(mu > 0.0) {
            return Err(MaterialError::NonPositiveMu(mu));
        }
        if !(lambda > 0.0) {
            return Err(MaterialError::NonPositiveLambda(lambda));
        }
        Self::check_floor(k)?;
        Ok(Self { mu, variant: ElasticVariant::Lambda { lambda }, k })
    }

    fn check_floor(k: f64) -> Result<(), MaterialError> {
        if !(k > 0.0 && k < 1.0) {
            return Err(MaterialError::DegradationFloorOutOfRange(k));
        }
        Ok(())
    }

    /// Volumetric exponent of the J^(-beta) term.
    pub fn beta(&self) -> f64 {
        match self.variant {
            ElasticVariant::Nu { nu } => 2.0 * nu / (1.0 - nu),
            ElasticVariant::Lambda { lambda } => lambda / self.mu,
        }
    }

    /// Degradation function g(phi) = (1 - phi)^2 + k.
    pub fn degradation(&self, phi: f64) -> f64 {
        (1.0 - phi) * (1.0 - phi) + self.k
    }
}

/// Energy density psi0(F) = mu/2 (tr[F^T F] + 1 - 3) + mu/beta (J^-beta - 1).
pub fn strain_energy(f: &Mat2, model: &MaterialModel) -> Result<f64, MaterialError> {
    let j = det2(f);
    if j <= 0.0 {
        return Err(MaterialError::NonPositiveJacobian(j));
    }
    let tr_c = f[0][0] * f[0][0] + f[0][1] * f[0][1] + f[1][0] * f[1][0] + f[1][1] * f[1][1] + 1.0;
    let beta = model.beta();
    Ok(0.5 * model.mu * (tr_c - 3.0) + model.mu / beta * (j.powf(-beta) - 1.0))
}

/// Same energy written in C = F^T F; used on the smoothed-kinematics path
/// where only C and J are available.
pub fn strain_energy_c(c: &Mat2, model: &MaterialModel) -> Result<f64, MaterialError> {
    let det_c = det2(c);
    if det_c <= 0.0 {
        return Err(MaterialError::NonPositiveJacobian(det_c));
    }
    let j = det_c.sqrt();
    let tr_c = c[0][0] + c[1][1] + 1.0;
    let beta = model.beta();
    Ok(0.5 * model.mu * (tr_c - 3.0) + model.mu / beta * (j.powf(-beta) - 1.0))
}

/// First Piola-Kirchhoff stress P0 = mu [F - J^-beta F^-T].
pub fn pk1(f: &Mat2, model: &MaterialModel) -> Result<Mat2, MaterialError> {
    let j = det2(f);
    if j <= 0.0 {
        return Err(MaterialError::NonPositiveJacobian(j));
    }
    let f_inv_t = transpose2(&inv2(f));
    let jb = j.powf(-model.beta());
    let mut p = [[0.0; 2]; 2];
    for i in 0..2 {
        for jj in 0..2 {
            p[i][jj] = model.mu * (f[i][jj] - jb * f_inv_t[i][jj]);
        }
    }
    Ok(p)
}

/// Second Piola-Kirchhoff stress S0 = mu (I - J^-beta C^-1), J = sqrt(det C).
pub fn pk2(c: &Mat2, model: &MaterialModel) -> Result<Mat2, MaterialError> {
    let det_c = det2(c);
    if det_c <= 0.0 {
        return Err(MaterialError::NonPositiveJacobian(det_c));
    }
    let jb = det_c.sqrt().powf(-model.beta());
    let c_inv = inv2(c);
    let mut s = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            s[i][j] = model.mu * (IDENTITY[i][j] - jb * c_inv[i][j]);
        }
    }
    Ok(s)
}

/// Material tangent 2 dS/dC in Voigt form (11, 22, 12):
/// C_ijkl = mu J^-beta [beta Cinv_ij Cinv_kl + Cinv_ik Cinv_jl + Cinv_il Cinv_jk].
pub fn tangent(c: &Mat2, model: &MaterialModel) -> Result<Voigt33, MaterialError> {
    let det_c = det2(c);
    if det_c <= 0.0 {
        return Err(MaterialError::NonPositiveJacobian(det_c));
    }
    let beta = model.beta();
    let scale = model.mu * det_c.sqrt().powf(-beta);
    let ci = inv2(c);
    const MAP: [(usize, usize); 3] = [(0, 0), (1, 1), (0, 1)];
    let mut v = [[0.0; 3]; 3];
    for (a, &(i, j)) in MAP.iter().enumerate() {
        for (b, &(k, l)) in MAP.iter().enumerate() {
            v[a][b] = scale * (beta * ci[i][j] * ci[k][l] + ci[i][k] * ci[j][l] + ci[i][l] * ci[j][k]);
        }
    }
    Ok(v)
}

/// Full undamaged response at one smoothed evaluation point.
pub fn stress_state(c: &Mat2, model: &MaterialModel) -> Result<StressState, MaterialError> {
    let s = pk2(c, model)?;
    Ok(StressState {
        psi0: strain_energy_c(c, model)?,
        s: crate::tensor::to_voigt(&s),
        c_tan: tangent(c, model)?,
    })
}

/// Scale the stress-bearing parts by g(phi); psi0 passes through undegraded.
pub fn degrade(state: &StressState, phi: f64, model: &MaterialModel) -> Result<StressState, MaterialError> {
    if !(-1e-12..=1.0 + 1e-12).contains(&phi) {
        return Err(MaterialError::PhaseOutOfRange(phi));
    }
    let g = model.degradation(phi.clamp(0.0, 1.0));
    let mut out = *state;
    for i in 0..3 {
        out.s[i] *= g;
        for j in 0..3 {
            out.c_tan[i][j] *= g;
        }
    }
    Ok(out)
}

/// Green-Lagrange strain E = (C - I) / 2. Diagnostic only.
pub fn green_lagrange(c: &Mat2) -> Mat2 {
    let mut e = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            e[i][j] = 0.5 * (c[i][j] - IDENTITY[i][j]);
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{ata, matmul2};

    fn rubber() -> MaterialModel {
        MaterialModel::nu_form(0.612, 0.45, 1e-8).unwrap()
    }

    #[test]
    fn reference_state_is_stress_free() {
        let m = rubber();
        assert_eq!(strain_energy(&IDENTITY, &m).unwrap(), 0.0);
        let p = pk1(&IDENTITY, &m).unwrap();
        let s = pk2(&IDENTITY, &m).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(p[i][j], 0.0);
                assert_eq!(s[i][j], 0.0);
            }
        }
    }

    #[test]
    fn simple_shear_energy() {
        // J = 1 kills the volumetric term: psi0 = mu * gamma^2 / 2.
        let f = [[1.0, 0.1], [0.0, 1.0]];
        let psi = strain_energy(&f, &rubber()).unwrap();
        assert!((psi - 3.06e-3).abs() < 1e-15, "psi0 = {psi}");
    }

    #[test]
    fn simple_shear_pk2_has_unit_jacobian_form() {
        // With J = 1, S0 = mu (I - C^-1).
        let f = [[1.0, 0.1], [0.0, 1.0]];
        let c = ata(&f);
        let m = rubber();
        let s = pk2(&c, &m).unwrap();
        let ci = inv2(&c);
        for i in 0..2 {
            for j in 0..2 {
                let expect = m.mu * (IDENTITY[i][j] - ci[i][j]);
                assert!((s[i][j] - expect).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn uniaxial_pk1_closed_form() {
        let m = rubber();
        let beta = m.beta();
        for lam in [0.8, 1.1, 1.5, 2.5] {
            let f = [[lam, 0.0], [0.0, 1.0]];
            let p = pk1(&f, &m).unwrap();
            let expect = m.mu * (lam - lam.powf(-beta - 1.0));
            assert!((p[0][0] - expect).abs() < 1e-12 * expect.abs().max(1.0));
        }
    }

    #[test]
    fn tangent_at_identity() {
        let m = MaterialModel::nu_form(1.0, 0.45, 1e-8).unwrap();
        let beta = m.beta();
        let v = tangent(&IDENTITY, &m).unwrap();
        assert!((v[0][0] - (2.0 + beta)).abs() < 1e-12); // C_1111 = mu (2 + beta)
        assert!((v[0][1] - beta).abs() < 1e-12); // C_1122 = mu beta
        assert!((v[2][2] - 1.0).abs() < 1e-12); // C_1212 = mu
        assert!((beta - 1.63636).abs() < 1e-5);
    }

    #[test]
    fn tangent_is_symmetric() {
        let f = [[1.3, 0.2], [-0.1, 0.9]];
        let v = tangent(&ata(&f), &rubber()).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(v[a][b], v[b][a]);
            }
        }
    }

    #[test]
    fn pk1_pk2_consistent() {
        let f = [[1.25, 0.15], [-0.05, 0.92]];
        let m = rubber();
        let p = pk1(&f, &m).unwrap();
        let s = pk2(&ata(&f), &m).unwrap();
        let fs = matmul2(&f, &s);
        let scale: f64 = p.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
        for i in 0..2 {
            for j in 0..2 {
                assert!((fs[i][j] - p[i][j]).abs() <= 1e-12 * scale);
            }
        }
    }

    #[test]
    fn degradation_scales_stress_not_energy() {
        let m = rubber();
        let state = stress_state(&ata(&[[1.2, 0.1], [0.0, 0.95]]), &m).unwrap();
        for (phi, g) in [(0.0, 1.0 + m.k), (0.5, 0.25 + m.k), (1.0, m.k)] {
            let d = degrade(&state, phi, &m).unwrap();
            assert_eq!(d.psi0, state.psi0);
            for i in 0..3 {
                assert!((d.s[i] - g * state.s[i]).abs() < 1e-15 * state.s[i].abs().max(1.0));
            }
        }
        assert!(degrade(&state, 1.5, &m).is_err());
        assert!(degrade(&state, -0.1, &m).is_err());
    }

    #[test]
    fn lambda_form_matches_nu_form_bitwise() {
        let nu_model = rubber();
        let lambda = nu_model.beta() * nu_model.mu;
        let lam_model = MaterialModel::lambda_form(nu_model.mu, lambda, nu_model.k).unwrap();
        let f = [[1.4, 0.3], [0.1, 0.8]];
        assert_eq!(
            strain_energy(&f, &nu_model).unwrap(),
            strain_energy(&f, &lam_model).unwrap()
        );
        let c = ata(&f);
        assert_eq!(pk2(&c, &nu_model).unwrap(), pk2(&c, &lam_model).unwrap());
        assert_eq!(tangent(&c, &nu_model).unwrap(), tangent(&c, &lam_model).unwrap());
    }

    #[test]
    fn green_lagrange_examples() {
        let e = green_lagrange(&[[1.21, 0.0], [0.0, 1.0]]);
        assert!((e[0][0] - 0.105).abs() < 1e-15);
        assert_eq!(e[1][1], 0.0);
        let c = [[1.3, 0.2], [0.2, 0.9]];
        let e = green_lagrange(&c);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(2.0 * e[i][j] + IDENTITY[i][j], c[i][j]);
            }
        }
    }

    #[test]
    fn inadmissible_states_are_rejected() {
        let m = rubber();
        let flipped = [[-1.0, 0.0], [0.0, 1.0]];
        assert!(matches!(
            strain_energy(&flipped, &m),
            Err(MaterialError::NonPositiveJacobian(_))
        ));
        assert!(pk1(&flipped, &m).is_err());
        assert!(pk2(&[[1.0, 2.0], [2.0, 1.0]], &m).is_err());
        assert!(MaterialModel::nu_form(-1.0, 0.3, 1e-8).is_err());
        assert!(MaterialModel::nu_form(1.0, 0.5, 1e-8).is_err());
        assert!(MaterialModel::lambda_form(1.0, 0.0, 1e-8).is_err());
        assert!(MaterialModel::nu_form(1.0, 0.3, 0.0).is_err());
    }
}
