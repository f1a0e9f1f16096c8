mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "csrk", version, about = "Construct, verify, discretize and run continuous-stage Runge-Kutta methods")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a method from one of the constructor families.
    Construct(ConstructArgs),
    /// Print the property report of a method file.
    Verify {
        method: PathBuf,
        /// Level cap for the simplifying-assumption checks.
        #[arg(long, default_value_t = csrk::verify::DEFAULT_LEVEL_CAP)]
        cap: usize,
    },
    /// Turn a method into a Butcher tableau with a quadrature rule.
    Discretize(DiscretizeArgs),
    /// Integrate a builtin problem with a tableau.
    Integrate(IntegrateArgs),
    /// Measure the empirical order over a list of step sizes.
    Convergence(ConvergenceArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Order,
    Simplifying,
    Symplectic,
    Symmetric,
    EpLegendre,
    EpGeneral,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Gauss,
    Lobatto,
}

#[derive(Args)]
pub struct ConstructArgs {
    #[arg(long, value_enum)]
    pub family: Family,
    /// Target order for `order` (2, 3 or 4).
    #[arg(long)]
    pub order: Option<u32>,
    /// Simplifying level of C-breve for `simplifying`.
    #[arg(long)]
    pub alpha: Option<usize>,
    /// Simplifying level of D-breve for `simplifying`.
    #[arg(long)]
    pub beta: Option<usize>,
    /// Free coefficient `i,j=value`, e.g. `2,1=1/5*sqrt(3)`; repeatable.
    #[arg(long = "set", value_name = "I,J=VALUE")]
    pub set: Vec<String>,
    /// Comma-separated weights for the energy-preserving families.
    #[arg(long)]
    pub omega: Option<String>,
    /// Legendre coefficients of one generator, comma-separated; repeat once per weight.
    #[arg(long = "generator", value_name = "COEFFS")]
    pub generators: Vec<String>,
    #[arg(long)]
    pub label: Option<String>,
    /// Method file; the report and manifest are written beside it.
    #[arg(long, default_value = "method.json")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct DiscretizeArgs {
    pub method: PathBuf,
    #[arg(long, value_enum, default_value = "gauss")]
    pub rule: Rule,
    #[arg(long)]
    pub stages: usize,
    /// Tableau format; defaults to the extension of `--out`.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, default_value = "tableau.json")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct ProblemArgs {
    /// harmonic, pendulum or kepler.
    #[arg(long)]
    pub problem: String,
    /// Kepler eccentricity.
    #[arg(long)]
    pub eccentricity: Option<f64>,
    /// Initial state, comma-separated.
    #[arg(long)]
    pub z0: Option<String>,
    #[arg(long, value_enum, default_value = "fixed-point")]
    pub solver: SolverArg,
    #[arg(long, default_value_t = 1e-14)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    FixedPoint,
    Newton,
}

#[derive(Args)]
pub struct IntegrateArgs {
    /// Tableau file, JSON or CSV.
    pub tableau: PathBuf,
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long)]
    pub h: f64,
    #[arg(long)]
    pub steps: usize,
    /// Trajectory format; defaults to the extension of `--out`.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, default_value = "trajectory.csv")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReferenceArg {
    Auto,
    Exact,
    Refined,
}

#[derive(Args)]
pub struct ConvergenceArgs {
    pub tableau: PathBuf,
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Geometric, strictly decreasing step sizes, comma-separated.
    #[arg(long)]
    pub h_list: String,
    #[arg(long, default_value_t = 1.0)]
    pub t_final: f64,
    #[arg(long, value_enum, default_value = "auto")]
    pub reference: ReferenceArg,
    /// Run the step sizes one after another instead of in parallel.
    #[arg(long)]
    pub sequential: bool,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, default_value = "convergence.csv")]
    pub out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Construct(a) => commands::construct(&a),
        Command::Verify { method, cap } => commands::verify(&method, cap),
        Command::Discretize(a) => commands::discretize(&a),
        Command::Integrate(a) => commands::integrate(&a),
        Command::Convergence(a) => commands::convergence(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", serde_json::to_string_pretty(&e.to_json()).expect("error serializes"));
            ExitCode::from(e.code as u8)
        }
    }
}
