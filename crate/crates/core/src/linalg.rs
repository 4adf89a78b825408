//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::{Error, Result};

/// Relative residual-norm threshold below which a column counts as a linear
/// combination of the columns kept before it.
pub const RANK_TOL: f64 = 1e-10;

/// Indices of a maximal set of linearly independent columns, chosen greedily
/// in column order by Gram–Schmidt.
pub fn independent_columns(x: &DMatrix<f64>) -> Vec<usize> {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut keep = Vec::new();
    for j in 0..x.ncols() {
        let col = x.column(j).into_owned();
        let norm = col.norm();
        if norm == 0.0 {
            continue;
        }
        let mut r = col;
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&r);
                r.axpy(-c, q, 1.0);
            }
        }
        let rn = r.norm();
        if rn > RANK_TOL * norm {
            basis.push(r / rn);
            keep.push(j);
        }
    }
    keep
}

pub fn select_columns(x: &DMatrix<f64>, cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), cols.len(), |i, j| x[(i, cols[j])])
}

/// Solve `a · x = b` for symmetric positive definite `a`.
pub fn solve_spd(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(b));
    }
    a.clone().lu().solve(b).ok_or(Error::Singular(what))
}

pub fn inverse_spd(a: &DMatrix<f64>, what: &'static str) -> Result<DMatrix<f64>> {
    solve_spd(a, &DMatrix::identity(a.nrows(), a.ncols()), what)
}

/// Eigenvalues of a symmetric matrix (symmetrized first).
pub fn sym_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let s = (a + a.transpose()) * 0.5;
    SymmetricEigen::new(s).eigenvalues.iter().cloned().collect()
}

/// Moore–Penrose inverse of a symmetric positive semidefinite matrix and its
/// numerical rank.
pub fn pinv_psd(a: &DMatrix<f64>) -> (DMatrix<f64>, usize) {
    let k = a.nrows();
    if k == 0 {
        return (DMatrix::zeros(0, 0), 0);
    }
    let s = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(s);
    let max = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
    let mut out = DMatrix::zeros(k, k);
    let mut rank = 0;
    for (i, &l) in eig.eigenvalues.iter().enumerate() {
        if l > RANK_TOL * max && l > 0.0 {
            let v = eig.eigenvectors.column(i);
            out += (v * v.transpose()) / l;
            rank += 1;
        }
    }
    (out, rank)
}
