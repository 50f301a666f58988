//! Constraint representations of the reduced stress space and the reduced
//! strain-displacement space.

use nalgebra::DMatrix;

use crate::dense;
use crate::error::{Error, Result};
use crate::fe_spaces::ks::KsSpace;
use crate::fe_spaces::stress::StressBasis;
use crate::local_fe::{LocalElement, QUADRATIC_MODE, VEPS_MODES};
use crate::solve::solve_spd;
use crate::sparse::{norm, SparseMatrix};

pub const RANK_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConstraintKind {
    /// Rows extract the quadratic-mode coefficient on each cell.
    ReducedStress,
    /// Rows pair strain-reduced displacements against reduced stresses.
    ReducedDisplacement,
}

#[derive(Clone, Debug)]
pub struct ConstraintSet {
    pub kind: ConstraintKind,
    pub rows: SparseMatrix,
}

impl ConstraintSet {
    pub fn num_rows(&self) -> usize {
        self.rows.nrows()
    }

    /// `max |C x|`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.rows.mul_vec(x).iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn dense_rank(&self) -> Result<usize> {
        dense::guard(self.rows.ncols())?;
        dense::rank(&self.rows.to_dense(), RANK_TOL)
    }
}

/// One row per cell giving the net quadratic-mode coefficient of a stress
/// coefficient vector.
pub fn reduced_stress_constraints(basis: &StressBasis) -> ConstraintSet {
    let mut triplets = Vec::new();
    for t in 0..basis.num_cells() {
        for (f, modes) in basis.cell_functions(t) {
            triplets.push((t, *f, modes[QUADRATIC_MODE]));
        }
    }
    ConstraintSet {
        kind: ConstraintKind::ReducedStress,
        rows: SparseMatrix::from_triplets(basis.num_cells(), basis.dim(), triplets),
    }
}

/// Pairing `(div tau_i, v) + (tau_i, eps_h v)` of each stress basis
/// function with the five strain-reduced modes of every cell, columns
/// ordered `5 t + k`.
pub fn veps_pairing(basis: &StressBasis, locals: &[LocalElement]) -> SparseMatrix {
    let mut triplets = Vec::new();
    for (t, el) in locals.iter().enumerate() {
        for (f, modes) in basis.cell_functions(t) {
            for (k, v) in VEPS_MODES.iter().enumerate() {
                triplets.push((*f, 5 * t + k, el.pair(modes, v)));
            }
        }
    }
    SparseMatrix::from_triplets(basis.dim(), 5 * locals.len(), triplets)
}

/// Dense constraint rows of the reduced displacement space: the pairing
/// against an orthonormal spanning set of the reduced stress space.
pub fn vrks_constraints(
    basis: &StressBasis,
    locals: &[LocalElement],
    reduced: &ConstraintSet,
) -> Result<ConstraintSet> {
    dense::guard(basis.dim())?;
    let span = dense::nullspace(&reduced.rows.to_dense(), RANK_TOL)?;
    let pairing = veps_pairing(basis, locals).to_dense();
    let rows = span.transpose() * pairing;
    let scale = rows.amax();
    let kept = dense::range(&rows.transpose(), RANK_TOL)?;
    let rows = kept.transpose();
    let triplets = (0..rows.nrows())
        .flat_map(|i| (0..rows.ncols()).map(move |j| (i, j)))
        .filter(|&(i, j)| rows[(i, j)].abs() > 1e-15 * scale.max(1.0))
        .map(|(i, j)| (i, j, rows[(i, j)]))
        .collect();
    Ok(ConstraintSet {
        kind: ConstraintKind::ReducedDisplacement,
        rows: SparseMatrix::from_triplets(rows.nrows(), rows.ncols(), triplets),
    })
}

/// Orthonormal basis (columns, `5 nt` rows) of the reduced displacement
/// space, from the dense constraints.
pub fn vrks_basis(constraints: &ConstraintSet) -> Result<DMatrix<f64>> {
    dense::guard(constraints.rows.ncols())?;
    dense::nullspace(&constraints.rows.to_dense(), RANK_TOL)
}

/// Relative distance of a strain-reduced field (coefficients `5 t + k`)
/// from the reduced displacement space: the pairing vector must lie in the
/// span of the quadratic-mode rows.
pub fn vrks_membership_defect(
    basis: &StressBasis,
    locals: &[LocalElement],
    reduced: &ConstraintSet,
    v: &[f64],
) -> Result<f64> {
    let pairing = veps_pairing(basis, locals);
    let p = pairing.mul_vec(v);
    let g = &reduced.rows;
    let ggt = g.matmul(&g.transpose());
    let y = solve_spd(&ggt, &g.mul_vec(&p))?;
    let fit = g.tr_mul_vec(&y);
    let defect: Vec<f64> = p.iter().zip(&fit).map(|(a, b)| a - b).collect();
    let denom = pairing.max_abs() * norm(v);
    Ok(if denom == 0.0 {
        0.0
    } else {
        norm(&defect) / denom
    })
}

/// Dimensions of the reduced spaces measured on a small mesh.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ReducedDims {
    pub stress: usize,
    pub displacement: usize,
}

pub fn reduced_dims(
    basis: &StressBasis,
    locals: &[LocalElement],
    reduced: &ConstraintSet,
) -> Result<ReducedDims> {
    let rank = reduced.dense_rank()?;
    if rank != reduced.num_rows() {
        return Err(Error::RankMismatch {
            what: "reduced stress constraints".into(),
            expected: reduced.num_rows(),
            found: rank,
        });
    }
    let vrks = vrks_constraints(basis, locals, reduced)?;
    Ok(ReducedDims {
        stress: basis.dim() - rank,
        displacement: 5 * locals.len() - vrks.num_rows(),
    })
}

/// Rank of the pairing between the stress basis and all of the piecewise
/// linear fields; equals `6 nt - dim V^KS` when the stress space is the
/// full annihilator.
pub fn p1_pairing_rank(basis: &StressBasis, locals: &[LocalElement]) -> Result<usize> {
    dense::guard(basis.dim())?;
    let mut m = DMatrix::zeros(basis.dim(), 6 * locals.len());
    for (t, el) in locals.iter().enumerate() {
        for (f, modes) in basis.cell_functions(t) {
            for k in 0..6 {
                let mut e = [0.0; 6];
                e[k] = 1.0;
                m[(*f, 6 * t + k)] = el.pair(modes, &e);
            }
        }
    }
    dense::rank(&m, RANK_TOL)
}

/// Dense matrix of KS basis restrictions as strain-reduced coefficients
/// after dropping the cell rotation; columns span the reduced displacement
/// space.
pub fn rotation_free_ks(ks: &KsSpace, locals: &[LocalElement]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(5 * locals.len(), ks.dim());
    let mut e = vec![0.0; ks.dim()];
    for j in 0..ks.dim() {
        e[j] = 1.0;
        for (t, el) in locals.iter().enumerate() {
            if ks.cell_dofs(t).contains(&Some(j)) {
                let c = ks.cell_field(t, el, &e);
                let v = [c[0], c[1], c[2], 0.5 * (c[3] + c[4]), c[5]];
                for k in 0..5 {
                    m[(5 * t + k, j)] = v[k];
                }
            }
        }
        e[j] = 0.0;
    }
    m
}
