//! The discrete problems: the mixed stress scheme, the primal
//! Kouhia-Stenberg scheme, the lowest-degree mixed scheme and the minimal
//! Navier-Lame scheme, plus the cellwise transfer between primal and mixed
//! solutions.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector6;
use rayon::prelude::*;

use crate::assembly::{
    assemble_a, assemble_b, assemble_ks_stiffness, cell_moments, ks_load, piecewise_load,
    LoadProjector, LOAD_DEGREE,
};
use crate::elasticity::{LameParams, Sym2};
use crate::error::{Error, Result};
use crate::fe_spaces::constraints::vrks_membership_defect;
use crate::fe_spaces::{Discretization, CONSTANT, RIGID};
use crate::local_fe::{
    constant_stress, eval_p1, eval_stress, eval_stress_div, p1_strain, veps_from_strain,
    LocalElement, P1Coeffs, StressCoeffs, P1_MODES, QUADRATIC_MODE, STRESS_MODES,
};
use crate::mesh::Point;
use crate::solve::{solve_spd, SaddleSystem};
use crate::sparse::norm;

/// Tolerance for the post-solve checks of each scheme.
pub const POST_TOL: f64 = 1e-9;
/// Tolerance for the minimal Navier-Lame residual check.
pub const PRIMAL_RESIDUAL_TOL: f64 = 1e-8;

pub type Load<'a> = &'a (dyn Fn(Point) -> [f64; 2] + Sync);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scheme {
    Hr,
    Ks,
    HrMin,
    NlMin,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Hr, Scheme::Ks, Scheme::HrMin, Scheme::NlMin];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Hr => "hr",
            Scheme::Ks => "ks",
            Scheme::HrMin => "hr-min",
            Scheme::NlMin => "nl-min",
        }
    }

    /// Whether the discrete stress has a meaningful broken divergence.
    pub fn has_divergence(self) -> bool {
        matches!(self, Scheme::Hr | Scheme::HrMin)
    }

    /// Whether the displacement is piecewise linear with a strain.
    pub fn has_strain(self) -> bool {
        matches!(self, Scheme::Ks | Scheme::NlMin)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| {
                Error::Invalid(format!(
                    "unknown scheme '{s}' (expected hr, ks, hr-min or nl-min)"
                ))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Field {
    U,
    Sigma,
    DivSigma,
    EpsU,
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "u" => Ok(Field::U),
            "sigma" => Ok(Field::Sigma),
            "div_sigma" | "div-sigma" => Ok(Field::DivSigma),
            "eps_u" | "eps-u" => Ok(Field::EpsU),
            _ => Err(Error::Invalid(format!("unknown field '{s}'"))),
        }
    }
}

/// A discrete solution stored cell by cell.
#[derive(Clone, Debug)]
pub struct DiscreteSolution {
    pub scheme: Scheme,
    pub params: LameParams,
    /// Unknowns of the solved system, multipliers excluded.
    pub ndof: usize,
    /// Coefficients over the stress basis, empty for primal schemes.
    pub stress_coeffs: Vec<f64>,
    /// Coefficients over the displacement space of the scheme.
    pub displacement_coeffs: Vec<f64>,
    pub cell_stress: Vec<StressCoeffs>,
    pub cell_displacement: Vec<P1Coeffs>,
    /// Named post-solve measurements.
    pub diagnostics: Vec<(&'static str, f64)>,
}

impl DiscreteSolution {
    pub fn diagnostic(&self, name: &str) -> Option<f64> {
        self.diagnostics
            .iter()
            .find(|(n, _)| *n == name)
            .map(|d| d.1)
    }
}

/// Value of a discrete field at a point: 2 entries for vectors, 3
/// (`xx, xy, yy`) for tensors.
pub fn evaluate(
    disc: &Discretization,
    sol: &DiscreteSolution,
    p: Point,
    field: Field,
) -> Result<Vec<f64>> {
    let t = disc
        .mesh
        .locate(p)
        .ok_or(Error::PointOutside { x: p[0], y: p[1] })?;
    let q = disc.locals[t].geometry.to_local(p);
    Ok(match field {
        Field::U => eval_p1(&sol.cell_displacement[t], q).to_vec(),
        Field::Sigma => eval_stress(&sol.cell_stress[t], q).to_array().to_vec(),
        Field::DivSigma => eval_stress_div(&sol.cell_stress[t], q).to_vec(),
        Field::EpsU => p1_strain(&sol.cell_displacement[t]).to_array().to_vec(),
    })
}

pub fn solve(
    disc: &Discretization,
    scheme: Scheme,
    params: &LameParams,
    f: Load<'_>,
) -> Result<DiscreteSolution> {
    match scheme {
        Scheme::Hr => solve_hr(disc, params, f),
        Scheme::Ks => solve_ks_primal(disc, params, f),
        Scheme::HrMin => solve_hr_min(disc, params, f),
        Scheme::NlMin => solve_nl_min(disc, params, f),
    }
}

fn cell_stresses(disc: &Discretization, coeffs: &[f64]) -> Vec<StressCoeffs> {
    (0..disc.num_cells())
        .map(|t| disc.stress.cell_stress(t, coeffs))
        .collect()
}

fn stress_l2(disc: &Discretization, cells: &[StressCoeffs]) -> f64 {
    disc.locals
        .iter()
        .zip(cells)
        .map(|(el, a)| {
            let v = Vector6::from(*a);
            v.dot(&(el.stress_mass * v))
        })
        .sum::<f64>()
        .sqrt()
}

fn div_l2(disc: &Discretization, cells: &[StressCoeffs]) -> f64 {
    disc.locals
        .iter()
        .zip(cells)
        .map(|(el, a)| {
            let v = Vector6::from(*a);
            v.dot(&(el.div_gram * v))
        })
        .sum::<f64>()
        .sqrt()
}

fn p1_l2(disc: &Discretization, cells: &[P1Coeffs]) -> f64 {
    disc.locals
        .iter()
        .zip(cells)
        .map(|(el, c)| {
            let v = Vector6::from(*c);
            v.dot(&(el.p1_mass * v))
        })
        .sum::<f64>()
        .sqrt()
}

fn relative_defect(lhs: &[f64], rhs: &[f64]) -> f64 {
    let d: Vec<f64> = lhs.iter().zip(rhs).map(|(a, b)| a - b).collect();
    let scale = norm(rhs).max(norm(lhs));
    if scale == 0.0 {
        0.0
    } else {
        norm(&d) / scale
    }
}

fn post(name: &str, value: f64, tol: f64) -> Result<()> {
    if value <= tol {
        Ok(())
    } else {
        Err(Error::PostCondition(format!(
            "{name} = {value:e} exceeds {tol:e}"
        )))
    }
}

/// Mixed scheme over the full stress space and piecewise rigid
/// displacements.
pub fn solve_hr(
    disc: &Discretization,
    params: &LameParams,
    f: Load<'_>,
) -> Result<DiscreteSolution> {
    let moments = cell_moments(disc, LOAD_DEGREE, f)?;
    let rhs = piecewise_load(RIGID, &moments);
    let b = assemble_b(disc, RIGID);
    let sys = SaddleSystem {
        a: assemble_a(disc, params, false),
        b,
        c: None,
        rhs_primary: vec![0.0; disc.stress.dim()],
        rhs_secondary: rhs.clone(),
    };
    let sol = sys.solve()?;
    let cells = cell_stresses(disc, &sol.primary);
    let displacement: Vec<P1Coeffs> = (0..disc.num_cells())
        .map(|t| RIGID.cell_field(t, &sol.secondary))
        .collect();

    let sigma_norm = stress_l2(disc, &cells);
    let area: f64 = disc.locals.iter().map(|el| el.geometry.area).sum();
    let trace: f64 = disc
        .locals
        .iter()
        .zip(&cells)
        .map(|(el, a)| el.trace_integral(a))
        .sum();
    let trace_rel = if sigma_norm == 0.0 {
        0.0
    } else {
        trace.abs() / (sigma_norm * area.sqrt())
    };
    let balance = relative_defect(&sys.b.mul_vec(&sol.primary), &rhs);
    post("relative trace integral", trace_rel, POST_TOL)?;
    post("rigid load balance", balance, POST_TOL)?;
    let projected_load = projected_norm(disc, RIGID, &moments);
    let stability = if projected_load == 0.0 {
        0.0
    } else {
        (sigma_norm + div_l2(disc, &cells) + p1_l2(disc, &displacement)) / projected_load
    };

    Ok(DiscreteSolution {
        scheme: Scheme::Hr,
        params: *params,
        ndof: disc.stress.dim() + RIGID.dim(disc.num_cells()),
        stress_coeffs: sol.primary,
        displacement_coeffs: sol.secondary,
        cell_stress: cells,
        cell_displacement: displacement,
        diagnostics: vec![
            ("trace_integral", trace),
            ("relative_trace_integral", trace_rel),
            ("load_balance", balance),
            ("stability_ratio", stability),
        ],
    })
}

/// L2 norm of the cellwise projection of a load onto a piecewise space.
fn projected_norm(
    disc: &Discretization,
    space: crate::fe_spaces::PiecewiseSpace,
    moments: &[P1Coeffs],
) -> f64 {
    disc.locals
        .iter()
        .enumerate()
        .map(|(t, el)| {
            let c = space.project(el, &moments[t]);
            let field = space.cell_field(0, &c);
            let v = Vector6::from(field);
            v.dot(&(el.p1_mass * v))
        })
        .sum::<f64>()
        .sqrt()
}

/// Primal Kouhia-Stenberg scheme for `div sigma = f`, i.e. with load
/// `-(f, v)`.
pub fn solve_ks_primal(
    disc: &Discretization,
    params: &LameParams,
    f: Load<'_>,
) -> Result<DiscreteSolution> {
    let moments = cell_moments(disc, LOAD_DEGREE, f)?;
    let rhs: Vec<f64> = ks_load(disc, &moments, LoadProjector::Identity)
        .iter()
        .map(|v| -v)
        .collect();
    let u = solve_spd(&assemble_ks_stiffness(disc, params), &rhs)?;
    Ok(primal_solution(disc, Scheme::Ks, params, u))
}

fn primal_solution(
    disc: &Discretization,
    scheme: Scheme,
    params: &LameParams,
    u: Vec<f64>,
) -> DiscreteSolution {
    let displacement: Vec<P1Coeffs> = disc
        .locals
        .iter()
        .enumerate()
        .map(|(t, el)| disc.ks.cell_field(t, el, &u))
        .collect();
    let cells = displacement
        .iter()
        .map(|c| constant_stress(params.elasticity(p1_strain(c))))
        .collect();
    DiscreteSolution {
        scheme,
        params: *params,
        ndof: u.len(),
        stress_coeffs: Vec::new(),
        displacement_coeffs: u,
        cell_stress: cells,
        cell_displacement: displacement,
        diagnostics: Vec::new(),
    }
}

/// Lowest-degree mixed scheme: reduced stresses and piecewise constant
/// displacements, with the reduction imposed through multipliers.
pub fn solve_hr_min(
    disc: &Discretization,
    params: &LameParams,
    f: Load<'_>,
) -> Result<DiscreteSolution> {
    let moments = cell_moments(disc, LOAD_DEGREE, f)?;
    let rhs = piecewise_load(CONSTANT, &moments);
    let sys = SaddleSystem {
        a: assemble_a(disc, params, false),
        b: assemble_b(disc, CONSTANT),
        c: Some(disc.reduced_constraints().rows.clone()),
        rhs_primary: vec![0.0; disc.stress.dim()],
        rhs_secondary: rhs.clone(),
    };
    let sol = sys.solve()?;
    let cells = cell_stresses(disc, &sol.primary);
    let displacement = (0..disc.num_cells())
        .map(|t| CONSTANT.cell_field(t, &sol.secondary))
        .collect();

    let scale = cells
        .iter()
        .flat_map(|a| a.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let quadratic = cells
        .iter()
        .fold(0.0f64, |m, a| m.max(a[QUADRATIC_MODE].abs()));
    let quadratic_rel = if scale == 0.0 { 0.0 } else { quadratic / scale };
    let balance = relative_defect(&sys.b.mul_vec(&sol.primary), &rhs);
    post("relative quadratic stress part", quadratic_rel, POST_TOL)?;
    post("mean load balance", balance, POST_TOL)?;

    let n_reduced = disc.stress.dim() - disc.num_cells();
    Ok(DiscreteSolution {
        scheme: Scheme::HrMin,
        params: *params,
        ndof: n_reduced + CONSTANT.dim(disc.num_cells()),
        stress_coeffs: sol.primary,
        displacement_coeffs: sol.secondary,
        cell_stress: cells,
        cell_displacement: displacement,
        diagnostics: vec![("quadratic_part", quadratic_rel), ("load_balance", balance)],
    })
}

/// Minimal Navier-Lame scheme, solved through the auxiliary mixed problem
/// with averaged compliance and recovered cell by cell.
pub fn solve_nl_min(
    disc: &Discretization,
    params: &LameParams,
    f: Load<'_>,
) -> Result<DiscreteSolution> {
    let moments = cell_moments(disc, LOAD_DEGREE, f)?;
    let rhs = piecewise_load(CONSTANT, &moments);
    let reduced = disc.reduced_constraints();
    let sys = SaddleSystem {
        a: assemble_a(disc, params, true),
        b: assemble_b(disc, CONSTANT),
        c: Some(reduced.rows.clone()),
        rhs_primary: vec![0.0; disc.stress.dim()],
        rhs_secondary: rhs,
    };
    let sol = sys.solve()?;
    let aux = cell_stresses(disc, &sol.primary);

    // Strain from the averaged auxiliary stress, constants from the
    // auxiliary displacement.
    let displacement: Vec<P1Coeffs> = disc
        .locals
        .iter()
        .enumerate()
        .map(|(t, el)| {
            let eps = params.compliance(el.mean_stress(&aux[t]));
            veps_from_strain([sol.secondary[2 * t], sol.secondary[2 * t + 1]], eps)
        })
        .collect();
    let strain_reduced: Vec<f64> = displacement
        .iter()
        .flat_map(|c| [c[0], c[1], c[2], c[3], c[5]])
        .collect();
    let membership = vrks_membership_defect(&disc.stress, &disc.locals, reduced, &strain_reduced)?;
    post("reduced displacement membership", membership, 1e-8)?;
    let residual = nl_min_residual(disc, params, &moments, &displacement);
    post(
        "minimal Navier-Lame residual",
        residual,
        PRIMAL_RESIDUAL_TOL,
    )?;

    let cells = displacement
        .iter()
        .map(|c| constant_stress(params.elasticity(p1_strain(c))))
        .collect();
    let n_reduced_u = disc.ks.dim();
    Ok(DiscreteSolution {
        scheme: Scheme::NlMin,
        params: *params,
        ndof: n_reduced_u,
        stress_coeffs: sol.primary,
        displacement_coeffs: strain_reduced,
        cell_stress: cells,
        cell_displacement: displacement,
        diagnostics: vec![
            ("membership_defect", membership),
            ("primal_residual", residual),
        ],
    })
}

/// Relative residual of `(C eps_h u, eps_h v) = -(f, P0 v)` over the
/// rotation-free KS functions, which span the reduced displacement space
/// and share strains and cell means with the KS basis.
pub fn nl_min_residual(
    disc: &Discretization,
    params: &LameParams,
    moments: &[P1Coeffs],
    u: &[P1Coeffs],
) -> f64 {
    let mut lhs = vec![0.0; disc.ks.dim()];
    for (t, el) in disc.locals.iter().enumerate() {
        let sigma = params.elasticity(p1_strain(&u[t]));
        let tests = el.geometry.test_functions();
        for (k, dof) in disc.ks.cell_dofs(t).iter().enumerate() {
            if let Some(i) = dof {
                lhs[*i] += el.geometry.area * sigma.ddot(p1_strain(&tests[k]));
            }
        }
    }
    let rhs: Vec<f64> = ks_load(disc, moments, LoadProjector::Mean)
        .iter()
        .map(|v| -v)
        .collect();
    relative_defect(&lhs, &rhs)
}

/// Coefficients of the cellwise rigid projection of a load.
pub fn rigid_projected_load(disc: &Discretization, f: Load<'_>) -> Result<Vec<f64>> {
    let moments = cell_moments(disc, LOAD_DEGREE, f)?;
    Ok(disc
        .locals
        .iter()
        .zip(&moments)
        .flat_map(|(el, m)| el.rigid_projection(m))
        .collect())
}

fn rigid_moments(el: &LocalElement, fh: &[f64], t: usize) -> P1Coeffs {
    el.p1_moments(&LocalElement::rigid_to_p1(&[
        fh[3 * t],
        fh[3 * t + 1],
        fh[3 * t + 2],
    ]))
}

/// KS problem with a piecewise rigid load, taken literally:
/// `(C eps_h r, eps_h s) = (f_h, s)`.
pub fn solve_ksred(disc: &Discretization, params: &LameParams, fh: &[f64]) -> Result<Vec<f64>> {
    let moments: Vec<P1Coeffs> = disc
        .locals
        .iter()
        .enumerate()
        .map(|(t, el)| rigid_moments(el, fh, t))
        .collect();
    solve_spd(
        &assemble_ks_stiffness(disc, params),
        &ks_load(disc, &moments, LoadProjector::Identity),
    )
}

/// Mixed counterpart recovered cell by cell from a KS solution.
#[derive(Clone, Debug)]
pub struct Transfer {
    /// Stress-mode coefficients of the recovered stress on each cell.
    pub cell_stress: Vec<StressCoeffs>,
    /// Rigid projection of the KS solution, three per cell.
    pub rigid_mean: Vec<f64>,
    /// Cell averages of the KS solution, two per cell.
    pub cell_mean: Vec<f64>,
}

/// On each cell, finds the stress whose pairing with every linear field
/// `s` equals `(f_h, s) - (C eps_h r, eps_h s)`.
pub fn transfer_primal_to_mixed(
    disc: &Discretization,
    params: &LameParams,
    r: &[f64],
    fh: &[f64],
) -> Transfer {
    let per_cell: Vec<(StressCoeffs, [f64; 3], [f64; 2])> = disc
        .locals
        .par_iter()
        .enumerate()
        .map(|(t, el)| {
            let rc = disc.ks.cell_field(t, el, r);
            let sigma = params.elasticity(p1_strain(&rc));
            let load = rigid_moments(el, fh, t);
            let rhs: P1Coeffs = std::array::from_fn(|m| {
                let mut e = [0.0; P1_MODES];
                e[m] = 1.0;
                load[m] - el.geometry.area * sigma.ddot(p1_strain(&e))
            });
            let moments = el.p1_moments(&rc);
            (
                el.stress_from_pairings(&rhs),
                el.rigid_projection(&moments),
                el.mean_projection(&moments),
            )
        })
        .collect();
    Transfer {
        cell_stress: per_cell.iter().map(|c| c.0).collect(),
        rigid_mean: per_cell.iter().flat_map(|c| c.1).collect(),
        cell_mean: per_cell.iter().flat_map(|c| c.2).collect(),
    }
}

/// Direct solve of the averaged-compliance mixed problem with piecewise
/// rigid load. Returns stress coefficients and the rigid multiplier `r_bar`
/// of `(A P0 zeta, P0 eta) - (r_bar, div eta) = 0`.
pub fn solve_stressred(
    disc: &Discretization,
    params: &LameParams,
    fh: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let moments: Vec<P1Coeffs> = disc
        .locals
        .iter()
        .enumerate()
        .map(|(t, el)| rigid_moments(el, fh, t))
        .collect();
    let sys = SaddleSystem {
        a: assemble_a(disc, params, true),
        b: assemble_b(disc, RIGID),
        c: None,
        rhs_primary: vec![0.0; disc.stress.dim()],
        rhs_secondary: piecewise_load(RIGID, &moments),
    };
    let sol = sys.solve()?;
    // The symmetric layout solves for -r_bar.
    let rbar = sol.secondary.iter().map(|v| -v).collect();
    Ok((sol.primary, rbar))
}

/// Measured agreement between the transfer and the direct mixed solve.
#[derive(Clone, Debug)]
pub struct EquivalenceReport {
    /// Largest stress-mode difference relative to the largest coefficient.
    pub stress_defect: f64,
    /// `|div_h zeta - f_h| / |f_h|` in L2 for the transferred stress.
    pub divergence_defect: f64,
    /// Sign `s` minimizing `|P0 zeta - s C eps_h r|`.
    pub strain_sign: f64,
    /// Relative defect of `P0 zeta = s C eps_h r` for the chosen sign.
    pub strain_defect: f64,
    /// Relative defect with the opposite sign.
    pub opposite_sign_defect: f64,
    /// `|r_bar - P^R r|` relative to `|r_bar|`.
    pub rbar_rigid_defect: f64,
    /// `|r_bar - P0 r|` (translation parts) relative to `|r_bar|`.
    pub rbar_mean_defect: f64,
}

pub fn check_equivalence(
    disc: &Discretization,
    params: &LameParams,
    f: Load<'_>,
) -> Result<EquivalenceReport> {
    let fh = rigid_projected_load(disc, f)?;
    let r = solve_ksred(disc, params, &fh)?;
    let transfer = transfer_primal_to_mixed(disc, params, &r, &fh);
    let (zeta, rbar) = solve_stressred(disc, params, &fh)?;
    let direct = cell_stresses(disc, &zeta);

    let scale = direct
        .iter()
        .chain(&transfer.cell_stress)
        .flat_map(|a| a.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    let stress_defect = direct
        .iter()
        .zip(&transfer.cell_stress)
        .flat_map(|(a, b)| (0..STRESS_MODES).map(move |k| (a[k] - b[k]).abs()))
        .fold(0.0f64, f64::max)
        / scale.max(f64::MIN_POSITIVE);

    let mut div_err = 0.0;
    let mut fh_norm = 0.0;
    let mut plus = 0.0f64;
    let mut minus = 0.0f64;
    let mut strain_scale = 0.0f64;
    for (t, el) in disc.locals.iter().enumerate() {
        let a = Vector6::from(transfer.cell_stress[t]);
        let div_moments = el.div_moment.transpose() * a;
        let minv = el.p1_mass.try_inverse().expect("P1 mass is SPD");
        let target = Vector6::from(LocalElement::rigid_to_p1(&[
            fh[3 * t],
            fh[3 * t + 1],
            fh[3 * t + 2],
        ]));
        let d = minv * div_moments - target;
        div_err += d.dot(&(el.p1_mass * d));
        fh_norm += target.dot(&(el.p1_mass * target));

        let mean = el.mean_stress(&transfer.cell_stress[t]);
        let ce = params.elasticity(p1_strain(&disc.ks.cell_field(t, el, &r)));
        plus = plus.max(sym_max(mean - ce));
        minus = minus.max(sym_max(mean + ce));
        strain_scale = strain_scale.max(sym_max(ce)).max(sym_max(mean));
    }
    let strain_scale = strain_scale.max(f64::MIN_POSITIVE);
    let (strain_sign, strain_defect, opposite_sign_defect) = if minus <= plus {
        (-1.0, minus / strain_scale, plus / strain_scale)
    } else {
        (1.0, plus / strain_scale, minus / strain_scale)
    };

    let rbar_norm = norm(&rbar).max(f64::MIN_POSITIVE);
    let rbar_rigid_defect = relative_defect(&rbar, &transfer.rigid_mean)
        * norm(&rbar).max(norm(&transfer.rigid_mean))
        / rbar_norm;
    let translations: Vec<f64> = rbar.chunks(3).flat_map(|c| [c[0], c[1]]).collect();
    let rbar_mean_defect = norm(
        &translations
            .iter()
            .zip(&transfer.cell_mean)
            .map(|(a, b)| a - b)
            .collect::<Vec<_>>(),
    ) / rbar_norm;

    Ok(EquivalenceReport {
        stress_defect,
        divergence_defect: if fh_norm == 0.0 {
            div_err.sqrt()
        } else {
            (div_err / fh_norm).sqrt()
        },
        strain_sign,
        strain_defect,
        opposite_sign_defect,
        rbar_rigid_defect,
        rbar_mean_defect,
    })
}

fn sym_max(s: Sym2) -> f64 {
    s.xx.abs().max(s.xy.abs()).max(s.yy.abs())
}

/// `(f, v)` for each rigid mode restricted to the constant modes; used to
/// check that the mixed solution also balances piecewise constant tests.
pub fn constant_balance(disc: &Discretization, sol: &DiscreteSolution, f: Load<'_>) -> Result<f64> {
    let moments = cell_moments(disc, LOAD_DEGREE, f)?;
    let rhs = piecewise_load(CONSTANT, &moments);
    let lhs = assemble_b(disc, CONSTANT).mul_vec(&sol.stress_coeffs);
    Ok(relative_defect(&lhs, &rhs))
}
