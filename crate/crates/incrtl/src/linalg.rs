//! Symmetric positive-definite solves shared by the estimator and gain code.
//!
//! Every linear system here goes through a Cholesky factorization; explicit
//! inverses are only formed when the inverse itself is the requested output
//! (covariance formulas). Singularity is declared when the smallest pivot of
//! the factorization falls below `1e-10` times the largest pivot.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

const PIVOT_RATIO_TOL: f64 = 1e-10;

/// Cholesky factorization of an SPD matrix with a pivot-ratio rank check.
pub(crate) struct SpdFactor {
    chol: Cholesky<f64, Dyn>,
}

impl SpdFactor {
    pub fn new(matrix: DMatrix<f64>, context: &'static str) -> Result<Self> {
        let chol = Cholesky::new(matrix).ok_or(Error::RankDeficient(context))?;
        // Pivots of the implicit LDL^T factorization are the squared diagonal
        // entries of L.
        let diag = chol.l_dirty().diagonal();
        let mut min_p = f64::INFINITY;
        let mut max_p: f64 = 0.0;
        for &d in diag.iter() {
            let p = d * d;
            min_p = min_p.min(p);
            max_p = max_p.max(p);
        }
        if !min_p.is_finite() || !max_p.is_finite() || min_p < PIVOT_RATIO_TOL * max_p {
            return Err(Error::RankDeficient(context));
        }
        Ok(Self { chol })
    }

    pub fn solve_vec(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(rhs)
    }

    pub fn solve_mat(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(rhs)
    }

    /// The explicit inverse, for formulas whose value is the inverse itself.
    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }
}

/// Solve `m x = rhs` for an SPD `m`.
pub(crate) fn solve_spd(
    m: DMatrix<f64>,
    rhs: &DVector<f64>,
    context: &'static str,
) -> Result<DVector<f64>> {
    Ok(SpdFactor::new(m, context)?.solve_vec(rhs))
}

/// `m^-1 a m^-1` for symmetric `a`, via two factorized solves.
pub(crate) fn sandwich_inverse(
    m: DMatrix<f64>,
    a: &DMatrix<f64>,
    context: &'static str,
) -> Result<DMatrix<f64>> {
    let f = SpdFactor::new(m, context)?;
    let left = f.solve_mat(a); // m^-1 a
    let full = f.solve_mat(&left.transpose()); // m^-1 a^T m^-T = m^-1 a m^-1
    Ok(symmetrize(&full))
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of a symmetric matrix.
pub(crate) fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let eig = m.clone().symmetric_eigenvalues();
    eig.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Largest absolute entry, used to scale tolerances.
pub(crate) fn max_abs_entry(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()))
}
