//! Direct sparse solve of one assembled system with Dirichlet elimination:
//! constrained rows and columns are removed, their prescribed increments
//! moved to the right-hand side, and the solution is scattered back with the
//! prescribed values in place.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};

use crate::assembly::GlobalSystem;

use super::{RejectReason, SolverError};

/// Solve K d = -f for the Newton increment d, honoring the system's
/// constrained dofs. The relative residual on the reduced system is checked
/// against `tol`; failures are reported as step-rejection signals.
pub fn linear_solve(system: &GlobalSystem, tol: f64) -> Result<Vec<f64>, SolverError> {
    let n = system.n;
    let mut prescribed: Vec<Option<f64>> = vec![None; n];
    for &(dof, value) in &system.constrained {
        prescribed[dof] = Some(value);
    }
    let mut reduced_index = vec![usize::MAX; n];
    let mut free = Vec::with_capacity(n);
    for dof in 0..n {
        if prescribed[dof].is_none() {
            reduced_index[dof] = free.len();
            free.push(dof);
        }
    }

    let mut out = vec![0.0; n];
    for &(dof, value) in &system.constrained {
        out[dof] = value;
    }
    let nf = free.len();
    if nf == 0 {
        return Ok(out);
    }

    // reduced rhs: free residual plus coupling to prescribed increments
    let mut rhs: Vec<f64> = free.iter().map(|&dof| system.rhs[dof]).collect();
    let mut triplets: Vec<Triplet<usize, usize, f64>> =
        Vec::with_capacity(system.triplets.len());
    for &(r, c, v) in &system.triplets {
        match (reduced_index[r], prescribed[c]) {
            (usize::MAX, _) => {}
            (rr, None) => triplets.push(Triplet::new(rr, reduced_index[c], v)),
            (rr, Some(inc)) => rhs[rr] += v * inc,
        }
    }

    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(nf, nf, &triplets)
        .map_err(|e| SolverError::Setup(format!("invalid sparse structure: {e:?}")))?;
    let lu = mat
        .sp_lu()
        .map_err(|e| SolverError::Reject(RejectReason::Singular(format!("{e:?}"))))?;
    let neg_rhs = faer::Mat::from_fn(nf, 1, |i, _| -rhs[i]);
    let x = lu.solve(&neg_rhs);

    // residual contract: ||K x + f|| <= tol * max(||f||, floor)
    let mut residual: Vec<f64> = rhs.clone();
    for t in &triplets {
        residual[t.row] += t.val * x[(t.col, 0)];
    }
    let rhs_norm = rhs.iter().map(|v| v * v).sum::<f64>().sqrt();
    let res_norm = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !res_norm.is_finite() || res_norm > tol * rhs_norm.max(1e-30) {
        return Err(SolverError::Reject(RejectReason::Singular(format!(
            "relative residual {:.3e} above {tol:.1e}",
            res_norm / rhs_norm.max(1e-30)
        ))));
    }

    for (k, &dof) in free.iter().enumerate() {
        out[dof] = x[(k, 0)];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(n: usize, triplets: Vec<(usize, usize, f64)>, rhs: Vec<f64>) -> GlobalSystem {
        GlobalSystem { n, triplets, rhs, constrained: Vec::new() }
    }

    #[test]
    fn identity_solve() {
        let sys = system(2, vec![(0, 0, 1.0), (1, 1, 1.0)], vec![-1.0, 0.0]);
        let x = linear_solve(&sys, 1e-10).unwrap();
        assert_eq!(x, vec![1.0, 0.0]);
    }

    #[test]
    fn two_by_two_spd() {
        let sys = system(
            2,
            vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 2.0)],
            vec![-1.0, -1.0],
        );
        let x = linear_solve(&sys, 1e-10).unwrap();
        assert!((x[0] - 1.0 / 3.0).abs() < 1e-14);
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn constrained_dofs_take_prescribed_values() {
        // 3-dof chain: K = tridiag(-1, 2, -1), dof 0 prescribed to move 0.5
        let mut sys = system(
            3,
            vec![
                (0, 0, 2.0),
                (0, 1, -1.0),
                (1, 0, -1.0),
                (1, 1, 2.0),
                (1, 2, -1.0),
                (2, 1, -1.0),
                (2, 2, 2.0),
            ],
            vec![0.0, 0.0, 0.0],
        );
        sys.constrained = vec![(0, 0.5)];
        let x = linear_solve(&sys, 1e-10).unwrap();
        assert_eq!(x[0], 0.5);
        // reduced system: [2 -1; -1 2] [x1 x2] = [0.5, 0]
        assert!((x[1] - 1.0 / 3.0).abs() < 1e-14);
        assert!((x[2] - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn fully_constrained_system() {
        let mut sys = system(2, vec![(0, 0, 1.0), (1, 1, 1.0)], vec![5.0, 5.0]);
        sys.constrained = vec![(0, 0.1), (1, -0.2)];
        let x = linear_solve(&sys, 1e-10).unwrap();
        assert_eq!(x, vec![0.1, -0.2]);
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let sys = system(2, vec![(0, 0, 1.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 1.0)], vec![
            1.0, -1.0,
        ]);
        let r = linear_solve(&sys, 1e-10);
        assert!(matches!(r, Err(SolverError::Reject(RejectReason::Singular(_)))));
    }

    #[test]
    fn random_spd_meets_residual_contract() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 50;
        // A = B^T B + n I assembled as a dense triplet set
        let b: Vec<Vec<f64>> =
            (0..n).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let mut v = if i == j { n as f64 } else { 0.0 };
                for k in 0..n {
                    v += b[k][i] * b[k][j];
                }
                triplets.push((i, j, v));
            }
        }
        let rhs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let sys = system(n, triplets.clone(), rhs.clone());
        let x = linear_solve(&sys, 1e-10).unwrap();
        let mut residual = rhs;
        for &(r, c, v) in &triplets {
            residual[r] += v * x[c];
        }
        let norm = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(norm < 1e-8);
    }
}
