//! Global sparse forms over the discrete spaces.

use nalgebra::{Matrix6, Vector6};
use rayon::prelude::*;

use crate::elasticity::LameParams;
use crate::error::Result;
use crate::fe_spaces::{Discretization, PiecewiseSpace};
use crate::local_fe::{p1_strain, LocalElement, P1Coeffs};
use crate::mesh::Point;
use crate::sparse::SparseMatrix;

/// Quadrature degree for loads given by closed-form fields.
pub const LOAD_DEGREE: usize = 10;

type Triplets = Vec<(usize, usize, f64)>;

/// Collects per-cell triplets in cell order so the summation order never
/// depends on scheduling.
fn collect_cells(n: usize, cell: impl Fn(usize) -> Triplets + Sync + Send) -> Triplets {
    let per_cell: Vec<Triplets> = (0..n).into_par_iter().map(cell).collect();
    per_cell.into_iter().flatten().collect()
}

/// `(M tau_i, tau_j)` for a cell form `M` given on stress modes.
pub fn assemble_stress_form(
    disc: &Discretization,
    form: impl Fn(&LocalElement) -> Matrix6<f64> + Sync + Send,
) -> SparseMatrix {
    let n = disc.stress.dim();
    let triplets = collect_cells(disc.num_cells(), |t| {
        let local = form(&disc.locals[t]);
        let funcs = disc.stress.cell_functions(t);
        let mut out = Vec::with_capacity(funcs.len() * funcs.len());
        for (i, a) in funcs {
            let la = local.transpose() * Vector6::from(*a);
            for (j, b) in funcs {
                out.push((*i, *j, la.dot(&Vector6::from(*b))));
            }
        }
        out
    });
    SparseMatrix::from_triplets(n, n, triplets)
}

/// Compliance form `(A tau_i, tau_j)`, or `(A P0 tau_i, P0 tau_j)` with
/// cellwise averages when `projected`.
pub fn assemble_a(disc: &Discretization, params: &LameParams, projected: bool) -> SparseMatrix {
    if projected {
        assemble_stress_form(disc, |el| el.projected_compliance_gram(params))
    } else {
        assemble_stress_form(disc, |el| el.compliance_gram(params))
    }
}

/// L2 Gram matrix of the stress basis.
pub fn assemble_stress_mass(disc: &Discretization) -> SparseMatrix {
    assemble_stress_form(disc, |el| el.stress_mass)
}

/// `(div tau_i, w_k)` with rows over a piecewise displacement space.
pub fn assemble_b(disc: &Discretization, space: PiecewiseSpace) -> SparseMatrix {
    let triplets = collect_cells(disc.num_cells(), |t| {
        let el = &disc.locals[t];
        let mut out = Vec::new();
        for (i, a) in disc.stress.cell_functions(t) {
            for (k, mode) in space.modes.iter().enumerate() {
                out.push((space.dof(t, k), *i, el.div_pair(a, mode)));
            }
        }
        out
    });
    SparseMatrix::from_triplets(space.dim(disc.num_cells()), disc.stress.dim(), triplets)
}

/// Per-cell moments `(g, e_m)` of a vector field.
pub fn cell_moments(
    disc: &Discretization,
    degree: usize,
    g: &(dyn Fn(Point) -> [f64; 2] + Sync),
) -> Result<Vec<P1Coeffs>> {
    disc.locals
        .par_iter()
        .map(|el| el.load_moments(degree, g))
        .collect()
}

/// `(g, w_k)` over a piecewise space from per-cell moments.
pub fn piecewise_load(space: PiecewiseSpace, moments: &[P1Coeffs]) -> Vec<f64> {
    moments.iter().flat_map(|m| space.mode_moments(m)).collect()
}

/// How the load enters the primal right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LoadProjector {
    /// `(g, v)`.
    Identity,
    /// `(g, P0 v)` with cellwise averages.
    Mean,
}

/// KS stiffness `(C eps_h v_i, eps_h v_j)`.
pub fn assemble_ks_stiffness(disc: &Discretization, params: &LameParams) -> SparseMatrix {
    let n = disc.ks.dim();
    let triplets = collect_cells(disc.num_cells(), |t| {
        let el = &disc.locals[t];
        let tests = el.geometry.test_functions();
        let strains: [_; 6] = std::array::from_fn(|k| p1_strain(&tests[k]));
        let dofs = disc.ks.cell_dofs(t);
        let mut out = Vec::new();
        for (k, dk) in dofs.iter().enumerate() {
            let Some(i) = dk else { continue };
            let sk = params.elasticity(strains[k]);
            for (l, dl) in dofs.iter().enumerate() {
                if let Some(j) = dl {
                    out.push((*i, *j, el.geometry.area * sk.ddot(strains[l])));
                }
            }
        }
        out
    });
    SparseMatrix::from_triplets(n, n, triplets)
}

/// KS load vector from per-cell moments of the load.
pub fn ks_load(disc: &Discretization, moments: &[P1Coeffs], projector: LoadProjector) -> Vec<f64> {
    let mut rhs = vec![0.0; disc.ks.dim()];
    for (t, el) in disc.locals.iter().enumerate() {
        let tests = el.geometry.test_functions();
        for (k, dof) in disc.ks.cell_dofs(t).iter().enumerate() {
            if let Some(i) = dof {
                rhs[*i] += match projector {
                    LoadProjector::Identity => tests[k]
                        .iter()
                        .zip(&moments[t])
                        .map(|(a, b)| a * b)
                        .sum::<f64>(),
                    LoadProjector::Mean => {
                        tests[k][0] * moments[t][0] + tests[k][1] * moments[t][1]
                    }
                };
            }
        }
    }
    rhs
}

/// Primal KS system for the load `g`: stiffness and right-hand side.
pub fn assemble_primal(
    disc: &Discretization,
    params: &LameParams,
    g: &(dyn Fn(Point) -> [f64; 2] + Sync),
    projector: LoadProjector,
) -> Result<(SparseMatrix, Vec<f64>)> {
    let moments = cell_moments(disc, LOAD_DEGREE, g)?;
    Ok((
        assemble_ks_stiffness(disc, params),
        ks_load(disc, &moments, projector),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense;
    use crate::fe_spaces::{CONSTANT, RIGID};
    use crate::local_fe::{eval_stress, ASSEMBLY_DEGREE};
    use crate::mesh::{generate_structured, Pattern};
    use crate::quadrature;

    fn disc(n: usize) -> Discretization {
        Discretization::new(generate_structured(n, Pattern::Crisscross).unwrap()).unwrap()
    }

    #[test]
    fn compliance_matrix_matches_pointwise_quadrature() {
        let d = disc(1);
        let p = LameParams::new(1.0, 1.0).unwrap();
        let a = assemble_a(&d, &p, false);
        assert!(a.is_symmetric());
        // Dense oracle: evaluate each basis function at quadrature points.
        let rule = quadrature::rule(ASSEMBLY_DEGREE).unwrap();
        let mut trace = 0.0;
        for f in 0..d.stress.dim() {
            let mut x = vec![0.0; d.stress.dim()];
            x[f] = 1.0;
            for (t, el) in d.locals.iter().enumerate() {
                let c = d.stress.cell_stress(t, &x);
                for (q, w) in el.geometry.local_points(rule) {
                    let s = eval_stress(&c, q);
                    trace += w * p.compliance_form(s, s);
                }
            }
        }
        let assembled: f64 = (0..d.stress.dim()).map(|i| a.get(i, i)).sum();
        assert!((trace - assembled).abs() < 1e-11 * trace);
        assert!((0..d.stress.dim()).all(|i| a.get(i, i) > 0.0));
    }

    #[test]
    fn projected_form_uses_cell_averages() {
        let d = disc(1);
        let p = LameParams::new(1.0, 3.0).unwrap();
        let a = assemble_a(&d, &p, true);
        for i in 0..d.stress.dim() {
            for j in 0..d.stress.dim() {
                let mut x = vec![0.0; d.stress.dim()];
                let mut y = vec![0.0; d.stress.dim()];
                x[i] = 1.0;
                y[j] = 1.0;
                let mut oracle = 0.0;
                for (t, el) in d.locals.iter().enumerate() {
                    let mi = el.mean_stress(&d.stress.cell_stress(t, &x));
                    let mj = el.mean_stress(&d.stress.cell_stress(t, &y));
                    oracle += el.geometry.area * p.compliance_form(mi, mj);
                }
                assert!((a.get(i, j) - oracle).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn divergence_rank_against_rigid() {
        let d = disc(1);
        let b = assemble_b(&d, RIGID);
        assert_eq!(b.nrows(), 12);
        assert_eq!(dense::rank(&b.to_dense(), 1e-10).unwrap(), 12);
        let b0 = assemble_b(&d, CONSTANT);
        assert_eq!(dense::rank(&b0.to_dense(), 1e-10).unwrap(), 8);
    }

    #[test]
    fn constant_mode_functions_have_zero_divergence_column() {
        let d = disc(2);
        let b = assemble_b(&d, RIGID);
        let bt = b.transpose();
        for (f, func) in d.stress.functions().iter().enumerate() {
            let t = func.pieces[0].0;
            let modes = d
                .stress
                .cell_functions(t)
                .iter()
                .find(|(g, _)| *g == f)
                .unwrap()
                .1;
            if func.pieces.len() == 1 && modes[3..].iter().all(|v| v.abs() < 1e-14) {
                assert_eq!(bt.row(f).count(), 0);
            }
        }
    }

    #[test]
    fn ks_stiffness_is_spd() {
        let d = disc(1);
        let p = LameParams::new(1.0, 1.0).unwrap();
        let (k, rhs) = assemble_primal(&d, &p, &|_| [0.0, 0.0], LoadProjector::Identity).unwrap();
        assert!(k.is_symmetric());
        assert!(rhs.iter().all(|v| *v == 0.0));
        let (ev, _) = dense::sym_eigen(&k.to_dense()).unwrap();
        assert!(ev[0] > 1e-8);
    }

    #[test]
    fn mean_projector_on_constant_load() {
        // For a constant load both projectors agree.
        let d = disc(2);
        let m = cell_moments(&d, LOAD_DEGREE, &|_| [1.0, -2.0]).unwrap();
        let a = ks_load(&d, &m, LoadProjector::Identity);
        let b = ks_load(&d, &m, LoadProjector::Mean);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }
}
