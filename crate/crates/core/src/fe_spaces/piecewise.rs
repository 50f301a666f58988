//! Discontinuous piecewise rigid and piecewise constant displacements.

use nalgebra::{DMatrix, DVector};

use crate::local_fe::{LocalElement, P1Coeffs, P0_MODES, P1_MODES, RIGID_MODES};

/// A piecewise space spanned cell by cell by fixed linear modes.
#[derive(Clone, Copy, Debug)]
pub struct PiecewiseSpace {
    pub modes: &'static [P1Coeffs],
}

pub const RIGID: PiecewiseSpace = PiecewiseSpace {
    modes: &RIGID_MODES,
};
pub const CONSTANT: PiecewiseSpace = PiecewiseSpace { modes: &P0_MODES };

impl PiecewiseSpace {
    pub fn per_cell(&self) -> usize {
        self.modes.len()
    }

    pub fn dim(&self, num_cells: usize) -> usize {
        num_cells * self.per_cell()
    }

    pub fn dof(&self, t: usize, k: usize) -> usize {
        t * self.per_cell() + k
    }

    pub fn cell_field(&self, t: usize, coeffs: &[f64]) -> P1Coeffs {
        let mut out = [0.0; P1_MODES];
        for (k, mode) in self.modes.iter().enumerate() {
            let c = coeffs[self.dof(t, k)];
            for m in 0..P1_MODES {
                out[m] += c * mode[m];
            }
        }
        out
    }

    /// Coefficients of the cellwise L2 projection from moments `(g, e_m)`.
    pub fn project(&self, el: &LocalElement, moments: &P1Coeffs) -> Vec<f64> {
        let k = self.per_cell();
        let basis = DMatrix::from_fn(P1_MODES, k, |m, j| self.modes[j][m]);
        let mass = DMatrix::from_fn(P1_MODES, P1_MODES, |i, j| el.p1_mass[(i, j)]);
        let gram = basis.transpose() * mass * &basis;
        let rhs = basis.transpose() * DVector::from_row_slice(moments);
        let sol = gram
            .lu()
            .solve(&rhs)
            .expect("mode Gram matrices are nonsingular");
        sol.iter().copied().collect()
    }

    /// Moments `(g, w_k)` against the space's modes from moments `(g, e_m)`.
    pub fn mode_moments(&self, moments: &P1Coeffs) -> Vec<f64> {
        self.modes
            .iter()
            .map(|mode| mode.iter().zip(moments).map(|(a, b)| a * b).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_fe::{CellGeometry, LocalElement};

    fn reference() -> LocalElement {
        LocalElement::new(CellGeometry::new([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap()).unwrap()
    }

    #[test]
    fn rigid_projection_reproduces_rigid_field() {
        let el = reference();
        let field = LocalElement::rigid_to_p1(&[0.3, -1.2, 0.7]);
        let c = RIGID.project(&el, &el.p1_moments(&field));
        for (a, b) in c.iter().zip([0.3, -1.2, 0.7]) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn mean_of_centred_linear_is_zero() {
        let el = reference();
        let field = [0.0, 0.0, 1.0, 0.0, 0.0, 0.0];
        let c = CONSTANT.project(&el, &el.p1_moments(&field));
        assert!(c.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn dof_layout() {
        assert_eq!(RIGID.dim(4), 12);
        assert_eq!(CONSTANT.dof(3, 1), 7);
        let coeffs = [0.0, 0.0, 1.0, 2.0];
        assert_eq!(
            CONSTANT.cell_field(1, &coeffs),
            [1.0, 2.0, 0.0, 0.0, 0.0, 0.0]
        );
    }
}
