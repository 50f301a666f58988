//! Sparse direct solves with residual control.
//!
//! Symmetric positive definite systems use a sparse Cholesky factorization,
//! indefinite saddle-point systems a sparse LU with partial pivoting. Both run
//! single-threaded so repeated runs give identical bits.

use std::sync::Once;

use faer::prelude::*;
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::sparse::{block_matrix, norm, Block, SparseMatrix};

/// Required relative residual `|Kx - b| / |b|`.
pub const RESIDUAL_TOL: f64 = 1e-9;
const REFINEMENT_STEPS: usize = 4;

fn sequential() {
    static INIT: Once = Once::new();
    INIT.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

fn to_col(b: &[f64]) -> Mat<f64> {
    Mat::from_fn(b.len(), 1, |i, _| b[i])
}

fn from_col(x: &Mat<f64>) -> Vec<f64> {
    (0..x.nrows()).map(|i| x[(i, 0)]).collect()
}

fn relative_residual(k: &SparseMatrix, x: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    let kx = k.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&kx).map(|(bi, ki)| bi - ki).collect();
    let nb = norm(b);
    let rel = if nb == 0.0 { norm(&r) } else { norm(&r) / nb };
    (r, rel)
}

/// Runs `solve` and up to a few rounds of iterative refinement until the
/// relative residual meets [`RESIDUAL_TOL`].
fn refine(k: &SparseMatrix, b: &[f64], solve: impl Fn(&[f64]) -> Vec<f64>) -> Result<Vec<f64>> {
    if b.iter().all(|&v| v == 0.0) {
        return Ok(vec![0.0; b.len()]);
    }
    let mut x = solve(b);
    let (mut r, mut rel) = relative_residual(k, &x, b);
    for _ in 0..REFINEMENT_STEPS {
        if rel <= RESIDUAL_TOL || !rel.is_finite() {
            break;
        }
        let dx = solve(&r);
        x.iter_mut().zip(&dx).for_each(|(xi, di)| *xi += di);
        (r, rel) = relative_residual(k, &x, b);
    }
    if rel <= RESIDUAL_TOL {
        Ok(x)
    } else {
        Err(Error::Solver {
            msg: "residual target not met".into(),
            residual: rel,
        })
    }
}

pub fn solve_spd(k: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    sequential();
    check_square(k, b)?;
    let chol = k
        .to_faer()
        .sp_cholesky(Side::Lower)
        .map_err(|e| Error::Solver {
            msg: format!("Cholesky factorization failed ({e:?}): matrix not positive definite"),
            residual: f64::NAN,
        })?;
    refine(k, b, |rhs| from_col(&chol.solve(to_col(rhs))))
}

pub fn solve_general(k: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    sequential();
    check_square(k, b)?;
    let lu = k.to_faer().sp_lu().map_err(|e| Error::Solver {
        msg: format!("LU factorization failed ({e:?})"),
        residual: f64::NAN,
    })?;
    refine(k, b, |rhs| from_col(&lu.solve(to_col(rhs))))
}

fn check_square(k: &SparseMatrix, b: &[f64]) -> Result<()> {
    if k.nrows() != k.ncols() || k.nrows() != b.len() {
        return Err(Error::Invalid(format!(
            "system shape {}x{} with rhs of length {}",
            k.nrows(),
            k.ncols(),
            b.len()
        )));
    }
    Ok(())
}

/// `[[A, B^T, C^T], [B, 0, 0], [C, 0, 0]]` with optional constraint rows `C`.
pub struct SaddleSystem {
    pub a: SparseMatrix,
    pub b: SparseMatrix,
    pub c: Option<SparseMatrix>,
    pub rhs_primary: Vec<f64>,
    pub rhs_secondary: Vec<f64>,
}

/// Solution blocks of a [`SaddleSystem`]; multipliers are kept for
/// inspection only.
#[derive(Clone, Debug)]
pub struct SaddleSolution {
    pub primary: Vec<f64>,
    pub secondary: Vec<f64>,
    pub multipliers: Vec<f64>,
}

impl SaddleSystem {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (
            self.a.nrows(),
            self.b.nrows(),
            self.c.as_ref().map_or(0, |c| c.nrows()),
        )
    }

    pub fn matrix(&self) -> SparseMatrix {
        let (n, m, p) = self.sizes();
        let mut blocks = vec![
            Block {
                row: 0,
                col: 0,
                matrix: &self.a,
                transpose: false,
            },
            Block {
                row: 0,
                col: n,
                matrix: &self.b,
                transpose: true,
            },
            Block {
                row: n,
                col: 0,
                matrix: &self.b,
                transpose: false,
            },
        ];
        if let Some(c) = &self.c {
            blocks.push(Block {
                row: 0,
                col: n + m,
                matrix: c,
                transpose: true,
            });
            blocks.push(Block {
                row: n + m,
                col: 0,
                matrix: c,
                transpose: false,
            });
        }
        block_matrix(n + m + p, n + m + p, &blocks)
    }

    pub fn rhs(&self) -> Vec<f64> {
        let (_, _, p) = self.sizes();
        let mut rhs = self.rhs_primary.clone();
        rhs.extend_from_slice(&self.rhs_secondary);
        rhs.extend(std::iter::repeat_n(0.0, p));
        rhs
    }

    pub fn solve(&self) -> Result<SaddleSolution> {
        let (n, m, _) = self.sizes();
        if self.b.ncols() != n || self.rhs_primary.len() != n || self.rhs_secondary.len() != m {
            return Err(Error::Invalid("inconsistent saddle block sizes".into()));
        }
        let x = solve_general(&self.matrix(), &self.rhs())?;
        Ok(SaddleSolution {
            primary: x[..n].to_vec(),
            secondary: x[n..n + m].to_vec(),
            multipliers: x[n + m..].to_vec(),
        })
    }
}
