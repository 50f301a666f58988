//! Dense linear algebra for small verification problems.

use faer::{Mat, Side};
use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Largest dense problem accepted by the spectral checks.
pub const DENSE_LIMIT: usize = 3000;

pub fn guard(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge {
            ndof: n,
            limit: DENSE_LIMIT,
        });
    }
    Ok(())
}

fn to_faer(m: &DMatrix<f64>) -> Mat<f64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, f64>) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Eigenvalues (nondecreasing) and eigenvectors of a symmetric matrix.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let sym = (m + m.transpose()) * 0.5;
    let evd = to_faer(&sym)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Solver {
            msg: format!("symmetric eigensolve failed ({e:?})"),
            residual: f64::NAN,
        })?;
    let vals = (0..m.nrows()).map(|i| evd.S()[i]).collect();
    Ok((vals, from_faer(evd.U())))
}

/// Singular values (nonincreasing) and the full right singular vectors.
fn svd_right(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if m.nrows() == 0 {
        return Ok((Vec::new(), DMatrix::identity(m.ncols(), m.ncols())));
    }
    let svd = to_faer(m).svd().map_err(|e| Error::Solver {
        msg: format!("SVD failed ({e:?})"),
        residual: f64::NAN,
    })?;
    let k = m.nrows().min(m.ncols());
    Ok(((0..k).map(|i| svd.S()[i]).collect(), from_faer(svd.V())))
}

/// Numerical rank with singular values above `rel_tol * s_max`.
pub fn rank(m: &DMatrix<f64>, rel_tol: f64) -> Result<usize> {
    let (s, _) = svd_right(m)?;
    let smax = s.first().copied().unwrap_or(0.0);
    Ok(s.iter().filter(|&&v| v > rel_tol * smax).count())
}

/// Orthonormal basis (columns) of the right nullspace.
pub fn nullspace(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let (s, v) = svd_right(m)?;
    let smax = s.first().copied().unwrap_or(0.0);
    let r = s.iter().filter(|&&x| x > rel_tol * smax).count();
    Ok(v.columns(r, m.ncols() - r).into_owned())
}

/// Orthonormal basis (columns) of the column space.
pub fn range(m: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let (s, v) = svd_right(&m.transpose())?;
    let smax = s.first().copied().unwrap_or(0.0);
    let r = s.iter().filter(|&&x| x > rel_tol * smax).count();
    Ok(v.columns(0, r).into_owned())
}

/// Eigenvalues of the pencil `k x = lambda m x` for symmetric `k` and SPD
/// `m`, nondecreasing.
pub fn generalized_eigenvalues(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<Vec<f64>> {
    let (mvals, mvecs) = sym_eigen(m)?;
    if mvals.first().is_none_or(|&v| v <= 0.0) && !mvals.is_empty() {
        return Err(Error::Solver {
            msg: "mass matrix is not positive definite".into(),
            residual: mvals[0],
        });
    }
    let scale = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        mvals.len(),
        mvals.iter().map(|v| 1.0 / v.sqrt()),
    ));
    let inv_sqrt = &mvecs * scale * mvecs.transpose();
    let reduced = &inv_sqrt * k * &inv_sqrt;
    Ok(sym_eigen(&reduced)?.0)
}
