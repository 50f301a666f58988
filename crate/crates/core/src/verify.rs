//! Numerical checks of the structural identities and discrete
//! inequalities behind the schemes.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, Matrix6, SMatrix, Vector6};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::assembly::{assemble_a, assemble_b, assemble_stress_form, assemble_stress_mass};
use crate::dense;
use crate::elasticity::LameParams;
use crate::error::{Error, Result};
use crate::fe_spaces::constraints::{self, RANK_TOL};
use crate::fe_spaces::stress::adjoint_residual;
use crate::fe_spaces::{Discretization, Group, StressBasis, CONSTANT, RIGID};
use crate::local_fe::{p1_strain, LocalElement, LOCAL_TOL, STRESS_MODES, VEPS_MODES};
use crate::sparse::SparseMatrix;

pub const DEFAULT_SEED: u64 = 42;

#[derive(Clone, Copy, Debug)]
pub struct AdjointReport {
    pub max_residual: f64,
    pub scale: f64,
}

impl AdjointReport {
    pub fn relative(&self) -> f64 {
        self.max_residual / self.scale
    }

    pub fn passed(&self) -> bool {
        self.relative() <= LOCAL_TOL
    }
}

pub fn check_adjoint_matrix(disc: &Discretization) -> AdjointReport {
    check_adjoint_with(disc, &disc.stress)
}

/// Adjoint check against an arbitrary (possibly perturbed) stress basis.
pub fn check_adjoint_with(disc: &Discretization, basis: &StressBasis) -> AdjointReport {
    let (max_residual, scale) = adjoint_residual(&disc.ks, &disc.locals, basis);
    AdjointReport {
        max_residual,
        scale,
    }
}

/// Structural facts about the spaces on one mesh.
#[derive(Clone, Debug)]
pub struct DimsReport {
    pub stress_dim: usize,
    pub expected_stress_dim: usize,
    pub max_functions_per_cell: usize,
    /// Interior vertices whose owned function count differs from
    /// valence minus one.
    pub valence_mismatches: usize,
    /// Largest valence among interior vertices with a correct count.
    pub max_checked_valence: usize,
    pub local_kernel_range_ok: bool,
    pub local_max_defect: f64,
    /// Largest L2 distance of a basis divergence from piecewise rigid
    /// fields, relative to the divergence norm.
    pub rigid_divergence_defect: f64,
    /// Rank of the divergence of the reduced space against rigid modes
    /// and against constants.
    pub reduced_div_rank: usize,
    pub reduced_div_constant_rank: usize,
    pub num_cells: usize,
    pub reduced_stress_dim: usize,
    pub annihilator_rank: usize,
    pub expected_annihilator_rank: usize,
    pub min_gram_eigenvalue: f64,
}

impl DimsReport {
    pub fn passed(&self) -> bool {
        self.stress_dim == self.expected_stress_dim
            && self.max_functions_per_cell <= 9
            && self.valence_mismatches == 0
            && self.local_kernel_range_ok
            && self.rigid_divergence_defect <= LOCAL_TOL
            && self.reduced_div_rank == 2 * self.num_cells
            && self.reduced_div_constant_rank == 2 * self.num_cells
            && self.reduced_stress_dim == self.stress_dim - self.num_cells
            && self.annihilator_rank == self.expected_annihilator_rank
            && self.min_gram_eigenvalue > 0.0
    }
}

pub fn check_dims(disc: &Discretization) -> Result<DimsReport> {
    let mesh = &disc.mesh;
    let stress = &disc.stress;
    dense::guard(stress.dim())?;
    let expected_stress_dim =
        6 * mesh.num_triangles() - mesh.num_interior_edges() - mesh.num_interior_vertices();
    let max_functions_per_cell = (0..disc.num_cells())
        .map(|t| stress.cell_functions(t).len())
        .max()
        .unwrap_or(0);
    let mut valence_mismatches = 0;
    let mut max_checked_valence = 0;
    for v in (0..mesh.num_vertices()).filter(|&v| !mesh.is_boundary_vertex(v)) {
        let owned = stress
            .functions()
            .iter()
            .filter(|f| f.group == Group::InteriorVertex && f.entity == v)
            .count();
        let valence = mesh.triangles_of_vertex(v).len();
        if owned + 1 == valence {
            max_checked_valence = max_checked_valence.max(valence);
        } else {
            valence_mismatches += 1;
        }
    }
    let mut local_kernel_range_ok = true;
    let mut local_max_defect: f64 = 0.0;
    for el in &disc.locals {
        let rep = el.kernel_range_report();
        local_kernel_range_ok &= rep.passed();
        local_max_defect = local_max_defect.max(rep.max_defect);
    }

    let mut rigid_divergence_defect: f64 = 0.0;
    for (t, el) in disc.locals.iter().enumerate() {
        let minv = el.p1_mass.try_inverse().expect("P1 mass is SPD");
        for (_, a) in stress.cell_functions(t) {
            let moments = el.div_moment.transpose() * Vector6::from(*a);
            let div = minv * moments;
            let norm_sq = div.dot(&(el.p1_mass * div));
            if norm_sq == 0.0 {
                continue;
            }
            let rigid = Vector6::from(LocalElement::rigid_to_p1(
                &el.rigid_projection(&moments.into()),
            ));
            let d = div - rigid;
            rigid_divergence_defect =
                rigid_divergence_defect.max((d.dot(&(el.p1_mass * d)) / norm_sq).sqrt());
        }
    }

    let reduced = disc.reduced_constraints();
    let span = dense::nullspace(&reduced.rows.to_dense(), RANK_TOL)?;
    let b_rigid = assemble_b(disc, RIGID).to_dense() * &span;
    let b_const = assemble_b(disc, CONSTANT).to_dense() * &span;
    let reduced_div_rank = dense::rank(&b_rigid, RANK_TOL)?;
    let reduced_div_constant_rank = dense::rank(&b_const, RANK_TOL)?;

    let gram = assemble_stress_mass(disc).to_dense();
    let (ev, _) = dense::sym_eigen(&gram)?;

    Ok(DimsReport {
        stress_dim: stress.dim(),
        expected_stress_dim,
        max_functions_per_cell,
        valence_mismatches,
        max_checked_valence,
        local_kernel_range_ok,
        local_max_defect,
        rigid_divergence_defect,
        reduced_div_rank,
        reduced_div_constant_rank,
        num_cells: disc.num_cells(),
        reduced_stress_dim: span.ncols(),
        annihilator_rank: constraints::p1_pairing_rank(stress, &disc.locals)?,
        expected_annihilator_rank: 6 * disc.num_cells() - disc.ks.dim(),
        min_gram_eigenvalue: ev.first().copied().unwrap_or(0.0),
    })
}

/// Operator pairs whose index of closed range is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IcrPair {
    /// Broken divergence on piecewise enriched stresses.
    DivOnSigmaMplus,
    /// Broken strain on piecewise strain-reduced displacements.
    EpsOnVepsm,
    /// Divergence on the stress space, L2 complement of the kernel.
    DivOnSigmaKs,
    /// Divergence on the stress space, complement of the kernel in the
    /// compliance inner product with unit Lame parameters.
    DivOnSigmaKsCompliance,
    /// Broken strain on the KS space.
    EpsOnKs,
    /// Divergence on the reduced stress space.
    DivOnSigmaRks,
    /// Broken strain on the reduced displacement space.
    EpsOnVrks,
}

impl IcrPair {
    pub const ALL: [IcrPair; 7] = [
        IcrPair::DivOnSigmaMplus,
        IcrPair::EpsOnVepsm,
        IcrPair::DivOnSigmaKs,
        IcrPair::DivOnSigmaKsCompliance,
        IcrPair::EpsOnKs,
        IcrPair::DivOnSigmaRks,
        IcrPair::EpsOnVrks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            IcrPair::DivOnSigmaMplus => "div_on_sigma_mplus",
            IcrPair::EpsOnVepsm => "eps_on_vepsm",
            IcrPair::DivOnSigmaKs => "div_on_sigma_ks",
            IcrPair::DivOnSigmaKsCompliance => "div_on_sigma_ks_compliance",
            IcrPair::EpsOnKs => "eps_on_ks",
            IcrPair::DivOnSigmaRks => "div_on_sigma_rks",
            IcrPair::EpsOnVrks => "eps_on_vrks",
        }
    }
}

impl fmt::Display for IcrPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for IcrPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        IcrPair::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Invalid(format!("unknown operator pair '{s}'")))
    }
}

#[derive(Clone, Debug)]
pub struct SpectralReport {
    pub pair: IcrPair,
    pub icr: f64,
    pub kernel_dim: usize,
    pub ndof: usize,
    pub h: f64,
}

/// Relative threshold separating kernel eigenvalues from the rest.
const KERNEL_TOL: f64 = 1e-10;

/// Kernel size and smallest nonzero eigenvalue of a pencil `(k, m)`.
fn pencil_gap(k: &DMatrix<f64>, m: &DMatrix<f64>) -> Result<(usize, f64)> {
    let ev = dense::generalized_eigenvalues(k, m)?;
    let top = ev
        .last()
        .copied()
        .unwrap_or(0.0)
        .abs()
        .max(f64::MIN_POSITIVE);
    let kernel = ev.iter().filter(|v| v.abs() <= KERNEL_TOL * top).count();
    let gap = ev.get(kernel).copied().ok_or_else(|| Error::Solver {
        msg: "operator vanishes on the whole space".into(),
        residual: f64::NAN,
    })?;
    Ok((kernel, gap))
}

fn to_dense6(m: &Matrix6<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(6, 6, |i, j| m[(i, j)])
}

/// Strain Gram and mass of the strain-reduced modes on one cell.
fn veps_pencil(el: &LocalElement) -> (DMatrix<f64>, DMatrix<f64>) {
    let basis = SMatrix::<f64, 6, 5>::from_fn(|m, k| VEPS_MODES[k][m]);
    let mass = basis.transpose() * el.p1_mass * basis;
    let strain = DMatrix::from_fn(5, 5, |i, j| {
        el.geometry.area * p1_strain(&VEPS_MODES[i]).ddot(p1_strain(&VEPS_MODES[j]))
    });
    (strain, DMatrix::from_fn(5, 5, |i, j| mass[(i, j)]))
}

/// KS strain Gram `(eps_h v_i, eps_h v_j)` and L2 mass.
fn ks_pencil(disc: &Discretization) -> (SparseMatrix, SparseMatrix) {
    let mut k = Vec::new();
    let mut m = Vec::new();
    for (t, el) in disc.locals.iter().enumerate() {
        let tests = el.geometry.test_functions();
        let dofs = disc.ks.cell_dofs(t);
        for (a, da) in dofs.iter().enumerate() {
            let Some(i) = da else { continue };
            for (b, db) in dofs.iter().enumerate() {
                let Some(j) = db else { continue };
                k.push((
                    *i,
                    *j,
                    el.geometry.area * p1_strain(&tests[a]).ddot(p1_strain(&tests[b])),
                ));
                let va = Vector6::from(tests[a]);
                let vb = Vector6::from(tests[b]);
                m.push((*i, *j, va.dot(&(el.p1_mass * vb))));
            }
        }
    }
    let n = disc.ks.dim();
    (
        SparseMatrix::from_triplets(n, n, k),
        SparseMatrix::from_triplets(n, n, m),
    )
}

pub fn compute_icr(disc: &Discretization, pair: IcrPair) -> Result<SpectralReport> {
    let h = disc.mesh.h();
    let report = |icr: f64, kernel_dim: usize, ndof: usize| SpectralReport {
        pair,
        icr,
        kernel_dim,
        ndof,
        h,
    };
    match pair {
        IcrPair::DivOnSigmaMplus | IcrPair::EpsOnVepsm => {
            let mut kernel_dim = 0;
            let mut worst: f64 = 0.0;
            for el in &disc.locals {
                let (k, m) = if pair == IcrPair::DivOnSigmaMplus {
                    (to_dense6(&el.div_gram), to_dense6(&el.stress_mass))
                } else {
                    veps_pencil(el)
                };
                let (kern, gap) = pencil_gap(&k, &m)?;
                kernel_dim += kern;
                worst = worst.max(1.0 / gap.sqrt());
            }
            let per_cell = if pair == IcrPair::DivOnSigmaMplus {
                STRESS_MODES
            } else {
                5
            };
            Ok(report(worst, kernel_dim, per_cell * disc.num_cells()))
        }
        IcrPair::DivOnSigmaKs | IcrPair::DivOnSigmaRks | IcrPair::DivOnSigmaKsCompliance => {
            let n = disc.stress.dim();
            dense::guard(n)?;
            let mut k = assemble_stress_form(disc, |el| el.div_gram).to_dense();
            let mut m = assemble_stress_mass(disc).to_dense();
            match pair {
                IcrPair::DivOnSigmaRks => {
                    let z =
                        dense::nullspace(&disc.reduced_constraints().rows.to_dense(), RANK_TOL)?;
                    k = z.transpose() * &k * &z;
                    m = z.transpose() * &m * &z;
                }
                IcrPair::DivOnSigmaKsCompliance => {
                    // Kernel of the divergence, then its complement in the
                    // compliance inner product.
                    let kernel = dense::nullspace(&k, KERNEL_TOL)?;
                    let a = assemble_a(disc, &LameParams::new(1.0, 1.0)?, false).to_dense();
                    let z = dense::nullspace(&(kernel.transpose() * a), RANK_TOL)?;
                    let kz = z.transpose() * &k * &z;
                    let mz = z.transpose() * &m * &z;
                    let ev = dense::generalized_eigenvalues(&kz, &mz)?;
                    let gap = ev.first().copied().unwrap_or(f64::NAN);
                    return Ok(report(1.0 / gap.sqrt(), kernel.ncols(), n));
                }
                _ => {}
            }
            let ndof = k.nrows();
            let (kernel_dim, gap) = pencil_gap(&k, &m)?;
            Ok(report(1.0 / gap.sqrt(), kernel_dim, ndof))
        }
        IcrPair::EpsOnKs | IcrPair::EpsOnVrks => {
            let (k, m) = ks_pencil(disc);
            dense::guard(k.nrows())?;
            let (mut k, mut m) = (k.to_dense(), m.to_dense());
            if pair == IcrPair::EpsOnVrks {
                // Rotation-free KS functions span the reduced space; their
                // strains agree with the KS strains, so only the mass
                // changes.
                let span = constraints::rotation_free_ks(&disc.ks, &disc.locals);
                let basis = dense::range(&span, RANK_TOL)?;
                let (vk, vm) = veps_block_pencil(disc);
                k = basis.transpose() * vk * &basis;
                m = basis.transpose() * vm * &basis;
            }
            let ndof = k.nrows();
            let (kernel_dim, gap) = pencil_gap(&k, &m)?;
            Ok(report(1.0 / gap.sqrt(), kernel_dim, ndof))
        }
    }
}

/// Block-diagonal strain Gram and mass on strain-reduced coefficients.
fn veps_block_pencil(disc: &Discretization) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = 5 * disc.num_cells();
    let mut k = DMatrix::zeros(n, n);
    let mut m = DMatrix::zeros(n, n);
    for (t, el) in disc.locals.iter().enumerate() {
        let (kt, mt) = veps_pencil(el);
        k.view_mut((5 * t, 5 * t), (5, 5)).copy_from(&kt);
        m.view_mut((5 * t, 5 * t), (5, 5)).copy_from(&mt);
    }
    (k, m)
}

#[derive(Clone, Copy, Debug)]
pub struct PoincareReport {
    /// Largest `|tau| / (|tau^D| + |div tau|)` over the random samples.
    pub worst_sample_ratio: f64,
    /// Largest `|tau|^2 / (|tau^D|^2 + |div tau|^2)` over the whole
    /// trace-free-mean subspace, square-rooted.
    pub worst_case_ratio: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Samples random members with zero mean trace and measures the
/// trace-deviatoric ratio; also computes the exact worst case.
pub fn check_tr_dev_poincare(
    disc: &Discretization,
    samples: usize,
    seed: u64,
) -> Result<PoincareReport> {
    if samples == 0 {
        return Err(Error::EmptySample);
    }
    let n = disc.stress.dim();
    dense::guard(n)?;
    let area: f64 = disc.locals.iter().map(|el| el.geometry.area).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_sample_ratio: f64 = 0.0;
    for _ in 0..samples {
        let x: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut cells: Vec<_> = (0..disc.num_cells())
            .map(|t| disc.stress.cell_stress(t, &x))
            .collect();
        let trace: f64 = disc
            .locals
            .iter()
            .zip(&cells)
            .map(|(el, a)| el.trace_integral(a))
            .sum();
        // The constant identity field belongs to the space.
        let c = trace / (2.0 * area);
        for a in &mut cells {
            a[0] -= c;
            a[2] -= c;
        }
        let (mut full, mut dev, mut div) = (0.0, 0.0, 0.0);
        for (el, a) in disc.locals.iter().zip(&cells) {
            let v = Vector6::from(*a);
            full += v.dot(&(el.stress_mass * v));
            dev += v.dot(&(el.dev_gram * v));
            div += v.dot(&(el.div_gram * v));
        }
        worst_sample_ratio = worst_sample_ratio.max(full.sqrt() / (dev.sqrt() + div.sqrt()));
    }

    let trace_row = DMatrix::from_fn(1, n, |_, i| {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        (0..disc.num_cells())
            .map(|t| disc.locals[t].trace_integral(&disc.stress.cell_stress(t, &e)))
            .sum()
    });
    let z = dense::nullspace(&trace_row, RANK_TOL)?;
    let m = assemble_stress_mass(disc).to_dense();
    let k = assemble_stress_form(disc, |el| el.dev_gram + el.div_gram).to_dense();
    let ev = dense::generalized_eigenvalues(&(z.transpose() * k * &z), &(z.transpose() * m * &z))?;
    let worst_case_ratio = 1.0 / ev[0].sqrt();

    Ok(PoincareReport {
        worst_sample_ratio,
        worst_case_ratio,
        samples,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured, Pattern};

    fn disc(n: usize, refine: usize) -> Discretization {
        let mut mesh = generate_structured(n, Pattern::Crisscross).unwrap();
        for _ in 0..refine {
            mesh = mesh.refine_uniform();
        }
        Discretization::new(mesh).unwrap()
    }

    #[test]
    fn dims_on_two_by_two() {
        let rep = check_dims(&disc(2, 0)).unwrap();
        assert!(rep.passed(), "{rep:?}");
        assert_eq!(rep.max_checked_valence, 8);
        let rep = check_dims(&disc(2, 1)).unwrap();
        assert!(rep.passed(), "{rep:?}");
    }

    #[test]
    fn adjoint_fault_scales_linearly() {
        let d = disc(2, 0);
        assert!(check_adjoint_matrix(&d).passed());
        let f = d
            .stress
            .functions()
            .iter()
            .position(|f| f.group == Group::InteriorVertex)
            .unwrap();
        let cell = d.stress.functions()[f].pieces[0].0;
        let r1 = check_adjoint_with(&d, &d.stress.perturbed(f, cell, 4, 1e-3)).max_residual;
        let r2 = check_adjoint_with(&d, &d.stress.perturbed(f, cell, 4, 2e-3)).max_residual;
        assert!(r1 > 1e-5 && (r2 / r1 - 2.0).abs() < 1e-8);
    }

    #[test]
    fn local_divergence_kernel_is_three_per_cell() {
        let d = disc(1, 0);
        let rep = compute_icr(&d, IcrPair::DivOnSigmaMplus).unwrap();
        assert_eq!(rep.kernel_dim, 3 * d.num_cells());
        let rep = compute_icr(&d, IcrPair::EpsOnVepsm).unwrap();
        assert_eq!(rep.kernel_dim, 2 * d.num_cells());
    }

    #[test]
    fn strain_is_injective_on_ks() {
        let rep = compute_icr(&disc(2, 0), IcrPair::EpsOnKs).unwrap();
        assert_eq!(rep.kernel_dim, 0);
        let rep = compute_icr(&disc(2, 0), IcrPair::EpsOnVrks).unwrap();
        assert_eq!(rep.kernel_dim, 0);
    }

    #[test]
    fn poincare_rejects_empty_sample_and_is_finite() {
        let d = disc(1, 0);
        assert!(matches!(
            check_tr_dev_poincare(&d, 0, 1),
            Err(Error::EmptySample)
        ));
        let rep = check_tr_dev_poincare(&d, 20, DEFAULT_SEED).unwrap();
        assert!(rep.worst_sample_ratio.is_finite() && rep.worst_case_ratio.is_finite());
        assert!(rep.worst_sample_ratio <= std::f64::consts::SQRT_2 * rep.worst_case_ratio + 1e-12);
        let again = check_tr_dev_poincare(&d, 20, DEFAULT_SEED).unwrap();
        assert_eq!(rep.worst_sample_ratio, again.worst_sample_ratio);
    }

    #[test]
    fn deviatoric_single_cell_function_ratio_is_one() {
        // A single-cell function with only the shear mode E12 is
        // deviatoric and divergence free.
        let d = disc(1, 0);
        let el = &d.locals[0];
        let a = [0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let v = Vector6::from(a);
        let full = v.dot(&(el.stress_mass * v)).sqrt();
        let dev = v.dot(&(el.dev_gram * v)).sqrt();
        let div = v.dot(&(el.div_gram * v)).sqrt();
        assert!((full / (dev + div) - 1.0).abs() < 1e-14);
    }
}
