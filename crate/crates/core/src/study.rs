//! Error norms against manufactured solutions and convergence studies.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::elasticity::{CaseId, LameParams, ManufacturedCase};
use crate::error::{Error, Result};
use crate::fe_spaces::Discretization;
use crate::local_fe::{eval_p1, eval_stress, eval_stress_div, p1_strain};
use crate::mesh::Mesh;
use crate::quadrature;
use crate::schemes::{solve, DiscreteSolution, Scheme};

/// Quadrature degree for errors against closed-form fields.
pub const ERROR_DEGREE: usize = 10;

pub const CSV_HEADER: &str =
    "scheme,case,level,h,ndof,lambda,err_u_l2,err_sigma_l2,err_div_l2,err_energy,rate_u,rate_sigma,rate_div,rate_energy";

/// L2 errors of one discrete solution. Entries that do not apply to the
/// scheme are `None`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ErrorRecord {
    pub u: f64,
    pub sigma: f64,
    pub div: Option<f64>,
    /// Broken strain error `|eps(u) - eps_h(u_h)|`.
    pub energy: Option<f64>,
}

impl ErrorRecord {
    pub fn as_array(&self) -> [Option<f64>; 4] {
        [Some(self.u), Some(self.sigma), self.div, self.energy]
    }
}

pub fn error_norms(
    disc: &Discretization,
    sol: &DiscreteSolution,
    case: &ManufacturedCase,
    degree: usize,
) -> Result<ErrorRecord> {
    let rule = quadrature::rule(degree)?;
    let sums: Vec<[f64; 4]> = disc
        .locals
        .par_iter()
        .enumerate()
        .map(|(t, el)| {
            let mut acc = [0.0; 4];
            let strain = p1_strain(&sol.cell_displacement[t]);
            for (p, q, w) in el.geometry.points(rule) {
                let u = case.u(p);
                let uh = eval_p1(&sol.cell_displacement[t], q);
                acc[0] += w * ((u[0] - uh[0]).powi(2) + (u[1] - uh[1]).powi(2));
                acc[1] += w * (case.sigma(p) - eval_stress(&sol.cell_stress[t], q)).norm_sq();
                let d = case.div_sigma(p);
                let dh = eval_stress_div(&sol.cell_stress[t], q);
                acc[2] += w * ((d[0] - dh[0]).powi(2) + (d[1] - dh[1]).powi(2));
                acc[3] += w * (case.eps(p) - strain).norm_sq();
            }
            acc
        })
        .collect();
    let total = sums.iter().fold([0.0; 4], |mut a, s| {
        for k in 0..4 {
            a[k] += s[k];
        }
        a
    });
    Ok(ErrorRecord {
        u: total[0].sqrt(),
        sigma: total[1].sqrt(),
        div: sol.scheme.has_divergence().then(|| total[2].sqrt()),
        energy: sol.scheme.has_strain().then(|| total[3].sqrt()),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyRow {
    pub level: usize,
    pub h: f64,
    pub ndof: usize,
    pub lambda: f64,
    pub errors: ErrorRecord,
    /// Observed rates `log2(e_{l-1} / e_l)` in the order u, sigma, div,
    /// energy.
    pub rates: [Option<f64>; 4],
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyTable {
    pub scheme: Scheme,
    pub case: CaseId,
    pub rows: Vec<StudyRow>,
}

/// Error norms selectable for rate and robustness summaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    U,
    Sigma,
    Div,
    Energy,
}

impl Norm {
    fn index(self) -> usize {
        match self {
            Norm::U => 0,
            Norm::Sigma => 1,
            Norm::Div => 2,
            Norm::Energy => 3,
        }
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6e}")).unwrap_or_default()
}

impl StudyTable {
    pub fn lambdas(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for r in &self.rows {
            if !out.contains(&r.lambda) {
                out.push(r.lambda);
            }
        }
        out
    }

    pub fn finest_level(&self) -> Option<usize> {
        self.rows.iter().map(|r| r.level).max()
    }

    fn row(&self, level: usize, lambda: f64) -> Option<&StudyRow> {
        self.rows
            .iter()
            .find(|r| r.level == level && r.lambda == lambda)
    }

    /// Rate between the two finest levels for one `lambda`.
    pub fn final_rate(&self, lambda: f64, norm: Norm) -> Option<f64> {
        self.row(self.finest_level()?, lambda)?.rates[norm.index()]
    }

    /// Largest over smallest finest-level error across the `lambda` sweep.
    pub fn robustness(&self, norm: Norm) -> Option<f64> {
        let level = self.finest_level()?;
        let errs: Vec<f64> = self
            .lambdas()
            .into_iter()
            .map(|l| {
                self.row(level, l)
                    .and_then(|r| r.errors.as_array()[norm.index()])
            })
            .collect::<Option<_>>()?;
        let max = errs.iter().copied().fold(f64::MIN, f64::max);
        let min = errs.iter().copied().fold(f64::MAX, f64::min);
        Some(max / min)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let e = r.errors.as_array();
            writeln!(
                out,
                "{},{},{},{:.6e},{},{:e},{},{},{},{},{},{},{},{}",
                self.scheme.name(),
                self.case.name(),
                r.level,
                r.h,
                r.ndof,
                r.lambda,
                fmt_opt(e[0]),
                fmt_opt(e[1]),
                fmt_opt(e[2]),
                fmt_opt(e[3]),
                fmt_opt(r.rates[0]),
                fmt_opt(r.rates[1]),
                fmt_opt(r.rates[2]),
                fmt_opt(r.rates[3]),
            )
            .expect("writing to a String cannot fail");
        }
        out
    }
}

/// Result of a study: the table so far and the failure that stopped it,
/// if any.
#[derive(Debug)]
pub struct StudyRun {
    pub table: StudyTable,
    pub failure: Option<Error>,
}

/// Solves `scheme` on `levels` uniform refinements of `base` (level 1 is
/// `base` itself) for every `lambda`.
pub fn convergence_study(
    base: &Mesh,
    scheme: Scheme,
    case: CaseId,
    levels: usize,
    lambdas: &[f64],
    mu: f64,
) -> StudyRun {
    let mut table = StudyTable {
        scheme,
        case,
        rows: Vec::new(),
    };
    let mut mesh = base.clone();
    let mut previous: Vec<Option<ErrorRecord>> = vec![None; lambdas.len()];
    for level in 1..=levels {
        if level > 1 {
            mesh = mesh.refine_uniform();
        }
        let disc = match Discretization::new(mesh.clone()) {
            Ok(d) => d,
            Err(e) => {
                return StudyRun {
                    table,
                    failure: Some(e),
                }
            }
        };
        let results: Vec<Result<(usize, ErrorRecord)>> = lambdas
            .par_iter()
            .map(|&lambda| {
                let params = LameParams::new(mu, lambda)?;
                let mc = ManufacturedCase::new(case, params);
                let sol = solve(&disc, scheme, &params, &|p| mc.f(p))?;
                Ok((sol.ndof, error_norms(&disc, &sol, &mc, ERROR_DEGREE)?))
            })
            .collect();
        for (i, (res, &lambda)) in results.into_iter().zip(lambdas).enumerate() {
            let (ndof, errors) = match res {
                Ok(v) => v,
                Err(e) => {
                    return StudyRun {
                        table,
                        failure: Some(e),
                    }
                }
            };
            let rates = match previous[i] {
                Some(prev) => {
                    let (a, b) = (prev.as_array(), errors.as_array());
                    std::array::from_fn(|k| match (a[k], b[k]) {
                        (Some(x), Some(y)) if x > 0.0 && y > 0.0 => Some((x / y).log2()),
                        _ => None,
                    })
                }
                None => [None; 4],
            };
            previous[i] = Some(errors);
            table.rows.push(StudyRow {
                level,
                h: disc.mesh.h(),
                ndof,
                lambda,
                errors,
                rates,
            });
        }
    }
    StudyRun {
        table,
        failure: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::local_fe::constant_stress;
    use crate::mesh::{generate_structured, Pattern};

    fn disc(n: usize) -> Discretization {
        Discretization::new(generate_structured(n, Pattern::Crisscross).unwrap()).unwrap()
    }

    fn zero_solution(d: &Discretization, scheme: Scheme) -> DiscreteSolution {
        DiscreteSolution {
            scheme,
            params: LameParams::new(1.0, 1.0).unwrap(),
            ndof: 0,
            stress_coeffs: Vec::new(),
            displacement_coeffs: Vec::new(),
            cell_stress: vec![[0.0; 6]; d.num_cells()],
            cell_displacement: vec![[0.0; 6]; d.num_cells()],
            diagnostics: Vec::new(),
        }
    }

    #[test]
    fn zero_solution_error_is_exact_norm() {
        let d = disc(2);
        let case = ManufacturedCase::new(CaseId::TrigGeneric, LameParams::new(1.0, 1.0).unwrap());
        let e = error_norms(&d, &zero_solution(&d, Scheme::Ks), &case, ERROR_DEGREE).unwrap();
        // Each component is sin(pi x) sin(pi y), whose square integrates to
        // 1/4 over the unit square.
        assert!((e.u - 0.5f64.sqrt()).abs() < 1e-8, "{}", e.u);
        assert!(e.div.is_none() && e.energy.is_some());
    }

    #[test]
    fn interpolated_exact_stress_has_small_error() {
        // Cellwise constant stress equal to the exact value at centroids:
        // error is O(h), far below the exact norm.
        let d = disc(4);
        let case =
            ManufacturedCase::new(CaseId::DivfreeLocking, LameParams::new(1.0, 1.0).unwrap());
        let mut sol = zero_solution(&d, Scheme::Hr);
        for (t, el) in d.locals.iter().enumerate() {
            sol.cell_stress[t] = constant_stress(case.sigma(el.geometry.centroid));
        }
        let near = error_norms(&d, &sol, &case, ERROR_DEGREE).unwrap();
        let far = error_norms(&d, &zero_solution(&d, Scheme::Hr), &case, ERROR_DEGREE).unwrap();
        assert!(near.sigma < 0.5 * far.sigma);
    }

    #[test]
    fn csv_layout_and_rates() {
        let base = generate_structured(1, Pattern::Crisscross).unwrap();
        let run = convergence_study(
            &base,
            Scheme::Hr,
            CaseId::DivfreeLocking,
            2,
            &[1.0, 1e6],
            1.0,
        );
        assert!(run.failure.is_none());
        let csv = run.table.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines.len(), 1 + 4);
        assert!(lines[1].starts_with("hr,divfree-locking,1,"));
        assert!(run.table.rows[0].rates.iter().all(Option::is_none));
        assert!(run.table.rows[2].rates[1].is_some());
        assert!(run.table.robustness(Norm::Sigma).unwrap() >= 1.0);
        let again = convergence_study(
            &base,
            Scheme::Hr,
            CaseId::DivfreeLocking,
            2,
            &[1.0, 1e6],
            1.0,
        );
        assert_eq!(csv, again.table.to_csv());
    }
}
