use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hrfem::elasticity::{LameParams, ManufacturedCase};
use hrfem::fe_spaces::Discretization;
use hrfem::mesh::{generate_structured, Mesh};
use hrfem::schemes::{self, evaluate, Field};
use hrfem::study::{convergence_study, error_norms, ERROR_DEGREE};
use hrfem::verify::{self, IcrPair};
use hrfem::Error;

use crate::args::{Check, Cli, Command, MeshOpts, MeshSpec, SolveArgs, StudyArgs, VerifyArgs};

/// Failure classes, each mapped to its own exit code.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Verification(String),
    Solver(String),
}

impl Failure {
    pub fn kind(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Verification(_) => "verification",
            Failure::Solver(_) => "solver",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Verification(m) | Failure::Solver(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Solver { .. } | Error::PostCondition(_) => Failure::Solver(msg),
            Error::Construction { .. }
            | Error::RankMismatch { .. }
            | Error::SingularCell { .. } => Failure::Verification(msg),
            _ => Failure::Usage(msg),
        }
    }
}

type Outcome = Result<(), Failure>;

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Mesh(a) => {
            let meshes = mesh_levels(&a.mesh)?;
            let mesh = meshes.last().expect("at least one level");
            mesh.save(&a.out)?;
            println!(
                "mesh nv={} nt={} ne={} h={:.6e} out={}",
                mesh.num_vertices(),
                mesh.num_triangles(),
                mesh.num_edges(),
                mesh.h(),
                a.out.display()
            );
            Ok(())
        }
        Command::Verify(a) => cmd_verify(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Study(a) => cmd_study(&a),
    }
}

fn base_mesh(spec: &MeshSpec) -> Result<Mesh, Failure> {
    Ok(match spec {
        MeshSpec::Structured(pattern, n) => generate_structured(*n, *pattern)?,
        MeshSpec::File(path) => Mesh::load(path)?,
    })
}

fn mesh_levels(opts: &MeshOpts) -> Result<Vec<Mesh>, Failure> {
    let mut out = vec![base_mesh(&opts.mesh)?];
    for _ in 1..opts.levels {
        let next = out.last().expect("nonempty").refine_uniform();
        out.push(next);
    }
    Ok(out)
}

fn write_out(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Accumulates report lines and failures of a verification run.
struct Report {
    text: String,
    failures: Vec<String>,
}

impl Report {
    fn line(&mut self, check: &str, level: usize, pass: bool, fields: &str) {
        let status = if pass { "pass" } else { "fail" };
        writeln!(self.text, "{check} level={level} {fields} status={status}")
            .expect("string write");
        if !pass {
            self.failures
                .push(format!("{check} level={level} {fields}"));
        }
    }
}

fn cmd_verify(a: &VerifyArgs) -> Outcome {
    if (a.check == Check::Poincare || a.check == Check::All) && a.samples == 0 {
        return Err(Failure::Usage(Error::EmptySample.to_string()));
    }
    let meshes = mesh_levels(&a.mesh)?;
    let discs: Vec<Discretization> = meshes
        .into_iter()
        .map(Discretization::new)
        .collect::<hrfem::Result<_>>()?;
    let mut rep = Report {
        text: String::new(),
        failures: Vec::new(),
    };
    let wants = |c: Check| a.check == c || a.check == Check::All;

    if wants(Check::Adjoint) {
        for (l, d) in discs.iter().enumerate() {
            let r = verify::check_adjoint_matrix(d);
            rep.line(
                "adjoint",
                l + 1,
                r.passed(),
                &format!(
                    "nt={} max_residual={:.3e} relative={:.3e}",
                    d.num_cells(),
                    r.max_residual,
                    r.relative()
                ),
            );
        }
    }
    if wants(Check::Dims) {
        for (l, d) in discs.iter().enumerate() {
            let r = verify::check_dims(d)?;
            rep.line(
                "dims",
                l + 1,
                r.passed(),
                &format!(
                    "stress_dim={} expected={} reduced_dim={} max_per_cell={} valence_mismatches={} rigid_div_defect={:.3e} min_gram_eig={:.3e}",
                    r.stress_dim,
                    r.expected_stress_dim,
                    r.reduced_stress_dim,
                    r.max_functions_per_cell,
                    r.valence_mismatches,
                    r.rigid_divergence_defect,
                    r.min_gram_eigenvalue
                ),
            );
        }
    }
    if wants(Check::Icr) {
        verify_icr(&discs, &mut rep)?;
    }
    if wants(Check::Poincare) {
        let mut first = None;
        for (l, d) in discs.iter().enumerate() {
            let r = verify::check_tr_dev_poincare(d, a.samples, a.seed)?;
            let base = *first.get_or_insert(r.worst_sample_ratio);
            rep.line(
                "poincare",
                l + 1,
                r.worst_sample_ratio <= 2.0 * base,
                &format!(
                    "seed={} samples={} sample_ratio={:.4} worst_case_ratio={:.4}",
                    r.seed, r.samples, r.worst_sample_ratio, r.worst_case_ratio
                ),
            );
        }
    }
    if wants(Check::Equivalence) {
        for (l, d) in discs.iter().enumerate() {
            for &lambda in &a.material.lambda.0 {
                let params = LameParams::new(a.material.mu, lambda)?;
                let case = ManufacturedCase::new(hrfem::elasticity::CaseId::TrigGeneric, params);
                let r = schemes::check_equivalence(d, &params, &|p| case.f(p))?;
                let pass = r.stress_defect <= 1e-8
                    && r.divergence_defect <= 1e-9
                    && r.strain_defect <= 1e-9;
                rep.line(
                    "equivalence",
                    l + 1,
                    pass,
                    &format!(
                        "lambda={lambda:e} stress_defect={:.3e} div_defect={:.3e} strain_sign={} strain_defect={:.3e} rbar_vs_rigid_projection={:.3e} rbar_vs_mean={:.3e}",
                        r.stress_defect, r.divergence_defect, r.strain_sign, r.strain_defect, r.rbar_rigid_defect, r.rbar_mean_defect
                    ),
                );
            }
        }
    }
    write_out(a.out.as_deref(), &rep.text)?;
    if a.out.is_some() {
        print!("{}", rep.text);
    }
    if rep.failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verification(rep.failures.join("; ")))
    }
}

fn verify_icr(discs: &[Discretization], rep: &mut Report) -> Outcome {
    let mut mplus = Vec::new();
    let mut compliance = Vec::new();
    for (l, d) in discs.iter().enumerate() {
        let mut values = std::collections::HashMap::new();
        for pair in IcrPair::ALL {
            let r = verify::compute_icr(d, pair)?;
            writeln!(
                rep.text,
                "icr level={} pair={} icr={:.6e} kernel_dim={} ndof={} h={:.4e}",
                l + 1,
                pair,
                r.icr,
                r.kernel_dim,
                r.ndof,
                r.h
            )
            .expect("string write");
            values.insert(pair, r.icr);
        }
        let lhs = values[&IcrPair::DivOnSigmaKs];
        let rhs = 2.0 * values[&IcrPair::DivOnSigmaMplus] + values[&IcrPair::EpsOnKs];
        rep.line(
            "icr_bound",
            l + 1,
            lhs <= rhs,
            &format!("lhs={lhs:.6e} rhs={rhs:.6e}"),
        );
        mplus.push(values[&IcrPair::DivOnSigmaMplus]);
        compliance.push(values[&IcrPair::DivOnSigmaKsCompliance]);
    }
    for l in 1..discs.len() {
        let ratio = mplus[l] / mplus[l - 1];
        rep.line(
            "icr_halving",
            l + 1,
            (0.4..=0.6).contains(&ratio),
            &format!("ratio={ratio:.4}"),
        );
        let growth = compliance[l] / compliance[l - 1];
        rep.line(
            "icr_bounded",
            l + 1,
            growth <= 1.2,
            &format!("growth={growth:.4}"),
        );
    }
    Ok(())
}

fn cmd_solve(a: &SolveArgs) -> Outcome {
    let meshes = mesh_levels(&a.mesh)?;
    let level = meshes.len();
    let disc = Discretization::new(meshes.into_iter().last().expect("nonempty"))?;
    let mut dump = String::from("lambda,cell,x,y,u1,u2,s11,s12,s22\n");
    for &lambda in &a.material.lambda.0 {
        let params = LameParams::new(a.material.mu, lambda)?;
        let case = ManufacturedCase::new(a.case, params);
        let sol = schemes::solve(&disc, a.scheme, &params, &|p| case.f(p))?;
        let err = error_norms(&disc, &sol, &case, ERROR_DEGREE)?;
        let split = match a.scheme {
            schemes::Scheme::Hr => format!(" ({} + {})", disc.stress.dim(), 3 * disc.num_cells()),
            schemes::Scheme::HrMin => {
                format!(
                    " ({} + {})",
                    disc.stress.dim() - disc.num_cells(),
                    2 * disc.num_cells()
                )
            }
            _ => String::new(),
        };
        let mut line = format!(
            "solve scheme={} case={} level={} nt={} lambda={lambda:e} mu={} ndof={}{split} err_u={:.6e} err_sigma={:.6e}",
            a.scheme,
            a.case.name(),
            level,
            disc.num_cells(),
            a.material.mu,
            sol.ndof,
            err.u,
            err.sigma
        );
        if let Some(v) = err.div {
            write!(line, " err_div={v:.6e}").expect("string write");
        }
        if let Some(v) = err.energy {
            write!(line, " err_energy={v:.6e}").expect("string write");
        }
        for (name, v) in &sol.diagnostics {
            write!(line, " {name}={v:.3e}").expect("string write");
        }
        println!("{line}");
        for (t, el) in disc.locals.iter().enumerate() {
            let c = el.geometry.centroid;
            let u = evaluate(&disc, &sol, c, Field::U)?;
            let s = evaluate(&disc, &sol, c, Field::Sigma)?;
            writeln!(
                dump,
                "{lambda:e},{t},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                c[0], c[1], u[0], u[1], s[0], s[1], s[2]
            )
            .expect("string write");
        }
    }
    if let Some(p) = &a.out {
        write_out(Some(p), &dump)?;
    }
    Ok(())
}

fn cmd_study(a: &StudyArgs) -> Outcome {
    let base = base_mesh(&a.mesh.mesh)?;
    let run = convergence_study(
        &base,
        a.scheme,
        a.case,
        a.mesh.levels as usize,
        &a.material.lambda.0,
        a.material.mu,
    );
    write_out(a.out.as_deref(), &run.table.to_csv())?;
    match run.failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}
