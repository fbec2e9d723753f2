//! Minimal fixed-size tensor helpers shared by the material and kinematics
//! code. Everything is plain arrays; row index first.

/// 2x2 second-order tensor, `m[i][j]` = row i, column j.
pub type Mat2 = [[f64; 2]; 2];

/// Symmetric 2x2 tensor in Voigt form: (11, 22, 12).
pub type Voigt3 = [f64; 3];

/// Symmetric rank-four tangent in Voigt form, ordering (11, 22, 12) with the
/// engineering-shear convention of the strain-displacement rows.
pub type Voigt33 = [[f64; 3]; 3];

pub const IDENTITY: Mat2 = [[1.0, 0.0], [0.0, 1.0]];

pub fn det2(m: &Mat2) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

/// Inverse of a 2x2 matrix. Caller guarantees a nonzero determinant.
pub fn inv2(m: &Mat2) -> Mat2 {
    let d = det2(m);
    [[m[1][1] / d, -m[0][1] / d], [-m[1][0] / d, m[0][0] / d]]
}

pub fn transpose2(m: &Mat2) -> Mat2 {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

pub fn matmul2(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// A^T * A, always symmetric.
pub fn ata(a: &Mat2) -> Mat2 {
    matmul2(&transpose2(a), a)
}

/// Frobenius inner product.
pub fn ddot2(a: &Mat2, b: &Mat2) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Symmetric 2x2 to Voigt (11, 22, 12).
pub fn to_voigt(m: &Mat2) -> Voigt3 {
    [m[0][0], m[1][1], m[0][1]]
}
