//! Global discrete spaces on a mesh.

pub mod constraints;
pub mod ks;
pub mod piecewise;
pub mod stress;

use std::sync::OnceLock;

pub use constraints::{ConstraintKind, ConstraintSet};
pub use ks::{KsDof, KsSpace};
pub use piecewise::{PiecewiseSpace, CONSTANT, RIGID};
pub use stress::{Group, StressBasis, StressFunction};

use crate::error::Result;
use crate::local_fe::{build_local_elements, LocalElement};
use crate::mesh::Mesh;

/// A mesh with its cell data and the spaces built on it.
#[derive(Debug)]
pub struct Discretization {
    pub mesh: Mesh,
    pub locals: Vec<LocalElement>,
    pub ks: KsSpace,
    pub stress: StressBasis,
    reduced: OnceLock<ConstraintSet>,
}

impl Discretization {
    pub fn new(mesh: Mesh) -> Result<Self> {
        let locals = build_local_elements(&mesh)?;
        let ks = KsSpace::new(&mesh);
        let stress = StressBasis::build(&mesh, &ks, &locals)?;
        Ok(Discretization {
            mesh,
            locals,
            ks,
            stress,
            reduced: OnceLock::new(),
        })
    }

    pub fn num_cells(&self) -> usize {
        self.locals.len()
    }

    pub fn reduced_constraints(&self) -> &ConstraintSet {
        self.reduced
            .get_or_init(|| constraints::reduced_stress_constraints(&self.stress))
    }
}

#[cfg(test)]
mod tests {
    use super::constraints::*;
    use super::*;
    use crate::dense;
    use crate::mesh::{generate_structured, Pattern};

    fn disc(n: usize) -> Discretization {
        Discretization::new(generate_structured(n, Pattern::Crisscross).unwrap()).unwrap()
    }

    #[test]
    fn reduced_dimensions_on_single_square() {
        let d = disc(1);
        let dims = reduced_dims(&d.stress, &d.locals, d.reduced_constraints()).unwrap();
        assert_eq!(dims.stress, 19 - 4);
        assert_eq!(dims.displacement, d.ks.dim());
    }

    #[test]
    fn annihilator_rank() {
        for n in [1, 2] {
            let d = disc(n);
            let rank = p1_pairing_rank(&d.stress, &d.locals).unwrap();
            assert_eq!(rank, 6 * d.num_cells() - d.ks.dim());
        }
    }

    #[test]
    fn reduced_displacements_are_rotation_free_ks() {
        let d = disc(2);
        let reduced = d.reduced_constraints();
        let vrks = vrks_constraints(&d.stress, &d.locals, reduced).unwrap();
        let span = rotation_free_ks(&d.ks, &d.locals);
        let rows = vrks.rows.to_dense();
        assert!((&rows * &span).amax() < 1e-9 * rows.amax() * span.amax());
        let basis = vrks_basis(&vrks).unwrap();
        assert_eq!(basis.ncols(), dense::rank(&span, RANK_TOL).unwrap());
        for j in 0..span.ncols() {
            let v: Vec<f64> = span.column(j).iter().copied().collect();
            let defect = vrks_membership_defect(&d.stress, &d.locals, reduced, &v).unwrap();
            assert!(defect < 1e-10, "{defect}");
        }
        let mut off = span.column(0).clone_owned();
        off[3] += 1.0;
        let v: Vec<f64> = off.iter().copied().collect();
        assert!(vrks_membership_defect(&d.stress, &d.locals, reduced, &v).unwrap() > 1e-4);
    }

    #[test]
    fn strain_is_injective_on_reduced_displacements() {
        let d = disc(2);
        let vrks = vrks_constraints(&d.stress, &d.locals, d.reduced_constraints()).unwrap();
        let basis = vrks_basis(&vrks).unwrap();
        // Strain coefficients are the last three strain-reduced modes.
        let mut strain = basis.clone();
        for t in 0..d.num_cells() {
            strain.row_mut(5 * t).fill(0.0);
            strain.row_mut(5 * t + 1).fill(0.0);
        }
        assert_eq!(dense::rank(&strain, RANK_TOL).unwrap(), basis.ncols());
    }

    #[test]
    fn edge_patch_without_quadratic_part_is_reduced() {
        let d = disc(2);
        let reduced = d.reduced_constraints();
        let mut x = vec![0.0; d.stress.dim()];
        let f = d
            .stress
            .functions()
            .iter()
            .position(|f| f.group == Group::InteriorEdge)
            .unwrap();
        x[f] = 1.0;
        // Remove the quadratic parts with the single-cell duals on each
        // cell of the patch: any function whose only cell is t works.
        for (t, _) in &d.stress.functions()[f].pieces {
            let q = d.stress.cell_stress(*t, &x)[crate::local_fe::QUADRATIC_MODE];
            let g = d
                .stress
                .cell_functions(*t)
                .iter()
                .find(|(g, m)| {
                    d.stress.functions()[*g].pieces.len() == 1
                        && m[crate::local_fe::QUADRATIC_MODE].abs() > 1e-8
                })
                .unwrap();
            x[g.0] -= q / g.1[crate::local_fe::QUADRATIC_MODE];
        }
        assert!(reduced.residual(&x) < 1e-12);
    }
}
