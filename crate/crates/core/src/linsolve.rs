//! Sparse direct solves for the condensed global systems.
//!
//! Assembly happens in triplet form; duplicate entries are summed when the
//! compressed matrix is built. Every solve runs one step of iterative
//! refinement and then asserts the residual contract, so a solution that
//! escapes this module is good to 1e-10 relative or the solve has failed
//! loudly.

use faer::prelude::*;
use faer::sparse::Triplet;
use faer::Side;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Relative residual every successful solve satisfies.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("system of dimension {n} is not flagged symmetric")]
    NotSymmetric { n: usize },
    #[error("matrix is not symmetric positive definite ({0})")]
    NotSpd(String),
    #[error("matrix is singular ({0})")]
    Singular(String),
    #[error("relative residual {residual:.3e} exceeds {tol:.1e} after refinement")]
    Residual { residual: f64, tol: f64 },
    #[error("invalid sparse structure: {0}")]
    Structure(String),
}

/// Square sparse system A x = b in triplet form plus right-hand sides,
/// one per column of `rhs`.
pub struct SparseSystem {
    n: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
    pub symmetric: bool,
    pub rhs: DMatrix<f64>,
}

impl SparseSystem {
    pub fn new(n: usize, symmetric: bool) -> Self {
        Self { n, entries: Vec::new(), symmetric, rhs: DMatrix::zeros(n, 1) }
    }

    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn n_entries(&self) -> usize {
        self.entries.len()
    }

    /// Accumulates `v` at (i, j). Entries at the same position sum.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.entries.push(Triplet::new(i, j, v));
    }

    pub fn add_rhs(&mut self, i: usize, v: f64) {
        self.rhs[(i, 0)] += v;
    }

    pub fn set_rhs(&mut self, b: &DVector<f64>) {
        assert_eq!(b.len(), self.n);
        self.rhs = DMatrix::from_column_slice(self.n, 1, b.as_slice());
    }

    /// A x through the raw triplets, independent of the compressed form.
    pub fn matvec(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut y = DMatrix::zeros(self.n, x.ncols());
        for t in &self.entries {
            for c in 0..x.ncols() {
                y[(t.row, c)] += t.val * x[(t.col, c)];
            }
        }
        y
    }

    /// Max over entries of |a_ij - a_ji| relative to the largest entry.
    pub fn symmetry_error(&self) -> f64 {
        let mut sums: std::collections::HashMap<(usize, usize), f64> = std::collections::HashMap::new();
        let mut amax = 0.0f64;
        for t in &self.entries {
            *sums.entry((t.row, t.col)).or_insert(0.0) += t.val;
        }
        for v in sums.values() {
            amax = amax.max(v.abs());
        }
        if amax == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for (&(i, j), &v) in &sums {
            if i < j {
                let w = sums.get(&(j, i)).copied().unwrap_or(0.0);
                worst = worst.max((v - w).abs());
            } else if i > j && !sums.contains_key(&(j, i)) {
                worst = worst.max(v.abs());
            }
        }
        worst / amax
    }

    fn compressed(&self) -> Result<SparseColMat<usize, f64>, SolveError> {
        SparseColMat::try_new_from_triplets(self.n, self.n, &self.entries)
            .map_err(|e| SolveError::Structure(format!("{e:?}")))
    }

    fn rhs_as_mat(&self) -> Mat<f64> {
        Mat::from_fn(self.n, self.rhs.ncols(), |i, j| self.rhs[(i, j)])
    }

    /// Refines x once through the factorization `solve`, then enforces the
    /// residual contract. ‖b‖ = 0 falls back to an absolute check.
    fn finish(
        &self,
        solve: impl Fn(&mut Mat<f64>),
        mut x: Mat<f64>,
    ) -> Result<DMatrix<f64>, SolveError> {
        let to_dm = |m: &Mat<f64>| DMatrix::from_fn(self.n, self.rhs.ncols(), |i, j| m[(i, j)]);
        for _ in 0..2 {
            let xd = to_dm(&x);
            if !xd.iter().all(|v| v.is_finite()) {
                return Err(SolveError::Singular("non-finite solution".into()));
            }
            let r = &self.rhs - self.matvec(&xd);
            let rel = (0..r.ncols())
                .map(|c| {
                    let bn = self.rhs.column(c).norm();
                    let rn = r.column(c).norm();
                    if bn == 0.0 { rn } else { rn / bn }
                })
                .fold(0.0f64, f64::max);
            if rel <= RESIDUAL_TOL {
                return Ok(xd);
            }
            let mut d = Mat::from_fn(self.n, r.ncols(), |i, j| r[(i, j)]);
            solve(&mut d);
            for j in 0..r.ncols() {
                for i in 0..self.n {
                    x[(i, j)] += d[(i, j)];
                }
            }
        }
        let xd = to_dm(&x);
        let r = &self.rhs - self.matvec(&xd);
        let rel = (0..r.ncols())
            .map(|c| {
                let bn = self.rhs.column(c).norm();
                let rn = r.column(c).norm();
                if bn == 0.0 { rn } else { rn / bn }
            })
            .fold(0.0f64, f64::max);
        if rel <= RESIDUAL_TOL {
            Ok(xd)
        } else {
            Err(SolveError::Residual { residual: rel, tol: RESIDUAL_TOL })
        }
    }

    /// Sparse Cholesky solve. One solution column per right-hand side.
    pub fn solve_spd(&self) -> Result<DMatrix<f64>, SolveError> {
        if !self.symmetric {
            return Err(SolveError::NotSymmetric { n: self.n });
        }
        let sym = self.symmetry_error();
        if sym > 1e-12 {
            return Err(SolveError::NotSpd(format!("symmetry error {sym:.3e}")));
        }
        let a = self.compressed()?;
        let llt = a
            .sp_cholesky(Side::Lower)
            .map_err(|e| SolveError::NotSpd(format!("{e:?}")))?;
        let mut x = self.rhs_as_mat();
        llt.solve_in_place(&mut x);
        self.finish(|m| llt.solve_in_place(m), x)
    }

    /// Sparse LU solve with partial pivoting for nonsymmetric systems.
    pub fn solve_general(&self) -> Result<DMatrix<f64>, SolveError> {
        let a = self.compressed()?;
        let lu = a
            .sp_lu()
            .map_err(|e| SolveError::Singular(format!("{e:?}")))?;
        let mut x = self.rhs_as_mat();
        lu.solve_in_place(&mut x);
        self.finish(|m| lu.solve_in_place(m), x)
    }

    /// Solves with whichever factorization the symmetry flag selects.
    pub fn solve(&self) -> Result<DMatrix<f64>, SolveError> {
        if self.symmetric { self.solve_spd() } else { self.solve_general() }
    }

    /// Solves against a caller-supplied right-hand side without touching the
    /// stored one.
    pub fn solve_with_rhs(&self, b: &DVector<f64>) -> Result<DVector<f64>, SolveError> {
        let alt = SparseSystem {
            n: self.n,
            entries: self.entries.clone(),
            symmetric: self.symmetric,
            rhs: DMatrix::from_column_slice(self.n, 1, b.as_slice()),
        };
        let x = alt.solve()?;
        Ok(x.column(0).clone_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_returns_the_rhs() {
        let mut s = SparseSystem::new(3, true);
        for i in 0..3 {
            s.add(i, i, 1.0);
        }
        s.set_rhs(&DVector::from_vec(vec![4.0, -1.0, 0.5]));
        let x = s.solve_spd().unwrap();
        assert_eq!(x.column(0).clone_owned(), DVector::from_vec(vec![4.0, -1.0, 0.5]));
        let y = s.solve_general().unwrap();
        assert_eq!(y.column(0).clone_owned(), DVector::from_vec(vec![4.0, -1.0, 0.5]));
    }

    #[test]
    fn two_by_two_spd_hand_solution() {
        let mut s = SparseSystem::new(2, true);
        s.add(0, 0, 2.0);
        s.add(0, 1, 1.0);
        s.add(1, 0, 1.0);
        s.add(1, 1, 2.0);
        s.set_rhs(&DVector::from_vec(vec![1.0, 1.0]));
        let x = s.solve_spd().unwrap();
        assert!((x[(0, 0)] - 1.0 / 3.0).abs() < 1e-14);
        assert!((x[(1, 0)] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn upper_triangular_back_substitution() {
        let mut s = SparseSystem::new(2, false);
        s.add(0, 0, 2.0);
        s.add(0, 1, 3.0);
        s.add(1, 1, 4.0);
        s.set_rhs(&DVector::from_vec(vec![8.0, 4.0]));
        let x = s.solve_general().unwrap();
        assert!((x[(1, 0)] - 1.0).abs() < 1e-14);
        assert!((x[(0, 0)] - 2.5).abs() < 1e-14);
    }

    #[test]
    fn duplicate_triplets_sum() {
        let mut s = SparseSystem::new(2, true);
        s.add(0, 0, 1.5);
        s.add(0, 0, 0.5);
        s.add(1, 1, 1.0);
        s.set_rhs(&DVector::from_vec(vec![2.0, 3.0]));
        let x = s.solve_spd().unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((x[(1, 0)] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let mut s = SparseSystem::new(2, true);
        s.add(0, 0, 1.0);
        s.add(1, 1, -1.0);
        s.set_rhs(&DVector::from_vec(vec![1.0, 1.0]));
        match s.solve_spd() {
            Err(SolveError::NotSpd(_)) => {}
            other => panic!("expected not-SPD error, got {other:?}"),
        }
    }

    #[test]
    fn asymmetric_entries_fail_the_spd_path() {
        let mut s = SparseSystem::new(2, true);
        s.add(0, 0, 2.0);
        s.add(0, 1, 1.0);
        s.add(1, 0, 0.5);
        s.add(1, 1, 2.0);
        match s.solve_spd() {
            Err(SolveError::NotSpd(msg)) => assert!(msg.contains("symmetry")),
            other => panic!("expected symmetry rejection, got {other:?}"),
        }
        assert!(s.symmetry_error() > 0.2);
    }

    #[test]
    fn unsymmetric_flag_routes_to_lu() {
        let mut s = SparseSystem::new(2, false);
        s.add(0, 0, 0.0);
        s.add(0, 1, 1.0);
        s.add(1, 0, 1.0);
        s.add(1, 1, 0.0);
        s.set_rhs(&DVector::from_vec(vec![5.0, 7.0]));
        let x = s.solve().unwrap();
        assert!((x[(0, 0)] - 7.0).abs() < 1e-14);
        assert!((x[(1, 0)] - 5.0).abs() < 1e-14);
        assert!(s.solve_spd().is_err());
    }

    #[test]
    fn singular_matrix_is_reported() {
        let mut s = SparseSystem::new(2, false);
        s.add(0, 0, 1.0);
        s.add(0, 1, 1.0);
        s.add(1, 0, 1.0);
        s.add(1, 1, 1.0);
        s.set_rhs(&DVector::from_vec(vec![1.0, 2.0]));
        match s.solve_general() {
            Err(SolveError::Singular(_)) | Err(SolveError::Residual { .. }) => {}
            other => panic!("expected failure on singular system, got {other:?}"),
        }
    }

    #[test]
    fn multiple_right_hand_sides_solve_together() {
        let mut s = SparseSystem::new(2, true);
        s.add(0, 0, 2.0);
        s.add(0, 1, 1.0);
        s.add(1, 0, 1.0);
        s.add(1, 1, 2.0);
        s.rhs = DMatrix::from_columns(&[
            DVector::from_vec(vec![1.0, 1.0]).column(0).clone_owned(),
            DVector::from_vec(vec![3.0, 0.0]).column(0).clone_owned(),
        ]);
        let x = s.solve_spd().unwrap();
        assert!((x[(0, 0)] - 1.0 / 3.0).abs() < 1e-14);
        assert!((x[(0, 1)] - 2.0).abs() < 1e-13);
        assert!((x[(1, 1)] + 1.0).abs() < 1e-13);
    }

    #[test]
    fn moderately_conditioned_laplacian_meets_the_contract() {
        // 1d second-difference matrix, condition ~ n^2.
        let n = 400;
        let mut s = SparseSystem::new(n, true);
        for i in 0..n {
            s.add(i, i, 2.0);
            if i + 1 < n {
                s.add(i, i + 1, -1.0);
                s.add(i + 1, i, -1.0);
            }
            s.add_rhs(i, (i as f64 * 0.37).sin());
        }
        let x = s.solve_spd().unwrap();
        let r = &s.rhs - s.matvec(&x);
        assert!(r.column(0).norm() / s.rhs.column(0).norm() <= RESIDUAL_TOL);
    }
}
