use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hrfem::elasticity::CaseId;
use hrfem::mesh::Pattern;
use hrfem::schemes::Scheme;

#[derive(Debug, Parser)]
#[command(
    name = "hrfem",
    version,
    about = "Mesh, verify, solve and run convergence studies for 2D mixed elasticity elements"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a mesh (optionally refined) and write it in text format.
    Mesh(MeshArgs),
    /// Run structural and spectral checks.
    Verify(VerifyArgs),
    /// Solve one discrete problem and print a summary.
    Solve(SolveArgs),
    /// Run a convergence study and write a CSV table.
    Study(StudyArgs),
}

/// Where the base mesh comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum MeshSpec {
    Structured(Pattern, usize),
    File(PathBuf),
}

impl FromStr for MeshSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, rest) = s.split_once(':').ok_or_else(|| {
            format!("expected crisscross:N, alternating:N or file:PATH, got '{s}'")
        })?;
        if kind == "file" {
            return Ok(MeshSpec::File(PathBuf::from(rest)));
        }
        let pattern: Pattern = kind.parse().map_err(|e| format!("{e}"))?;
        let n: usize = rest
            .parse()
            .map_err(|_| format!("invalid mesh size '{rest}'"))?;
        if n == 0 {
            return Err("mesh size must be at least 1".into());
        }
        Ok(MeshSpec::Structured(pattern, n))
    }
}

/// Comma-separated list of positive lambda values.
#[derive(Clone, Debug, PartialEq)]
pub struct LambdaList(pub Vec<f64>);

impl FromStr for LambdaList {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        parse_lambdas(s).map(LambdaList)
    }
}

fn parse_lambdas(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|x| {
            let v: f64 = x
                .trim()
                .parse()
                .map_err(|_| format!("invalid lambda '{x}'"))?;
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(format!("lambda must be positive and finite, got {v}"))
            }
        })
        .collect()
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_case(s: &str) -> Result<CaseId, String> {
    s.parse().map_err(|e| format!("{e}"))
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("invalid number '{s}'"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("expected a positive finite number, got {v}"))
    }
}

#[derive(Debug, Args)]
pub struct MeshOpts {
    /// Base mesh: crisscross:N, alternating:N or file:PATH.
    #[arg(long, default_value = "crisscross:1")]
    pub mesh: MeshSpec,
    /// Number of mesh levels; level 1 is the base mesh.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=8))]
    pub levels: u32,
}

#[derive(Debug, Args)]
pub struct MaterialOpts {
    /// Comma-separated list of lambda values.
    #[arg(long, default_value = "1")]
    pub lambda: LambdaList,
    #[arg(long, default_value_t = 1.0, value_parser = parse_positive)]
    pub mu: f64,
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    #[command(flatten)]
    pub mesh: MeshOpts,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Check {
    Adjoint,
    Dims,
    Icr,
    Poincare,
    Equivalence,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    pub check: Check,
    #[command(flatten)]
    pub mesh: MeshOpts,
    #[command(flatten)]
    pub material: MaterialOpts,
    #[arg(long, default_value_t = hrfem::verify::DEFAULT_SEED)]
    pub seed: u64,
    /// Random samples for the trace-deviatoric check.
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    /// Optional report file; the report is always printed.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Scheme,
    #[arg(long, value_parser = parse_case)]
    pub case: CaseId,
    #[command(flatten)]
    pub mesh: MeshOpts,
    #[command(flatten)]
    pub material: MaterialOpts,
    /// Write cell-centroid values of u and sigma as CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accepted for uniformity; solves are deterministic.
    #[arg(long, default_value_t = hrfem::verify::DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(long, value_parser = parse_scheme)]
    pub scheme: Scheme,
    #[arg(long, value_parser = parse_case)]
    pub case: CaseId,
    #[command(flatten)]
    pub mesh: MeshOpts,
    #[command(flatten)]
    pub material: MaterialOpts,
    /// CSV output; printed to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Accepted for uniformity; studies are deterministic.
    #[arg(long, default_value_t = hrfem::verify::DEFAULT_SEED)]
    pub seed: u64,
}
