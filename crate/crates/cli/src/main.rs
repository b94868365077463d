mod commands;
mod config;

use bubblelab::exec::{with_thread_cap, Execution};
use bubblelab::solver::ProjectionKind;
use clap::{Args, Parser, Subcommand};
use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

/// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
/// 4 acceptance check violated.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError { code: 2, message: msg.into() }
    }

    pub fn check(msg: impl Into<String>) -> Self {
        CliError { code: 4, message: msg.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<bubblelab::Error> for CliError {
    fn from(e: bubblelab::Error) -> Self {
        use bubblelab::Error as E;
        let code = match e {
            E::DimensionMismatch { .. }
            | E::InvalidParameter(_)
            | E::OutsideDomain
            | E::GridMismatch(_)
            | E::Regime(_)
            | E::Unsupported(_)
            | E::Parse(_) => 2,
            E::Quadrature(_) | E::Solver(_) | E::Indefinite(_) | E::NotConverged(_) | E::Io(_) => 3,
            E::Postcondition(_) => 4,
        };
        CliError { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError { code: 3, message: e.to_string() }
    }
}

#[derive(Parser, Debug)]
#[command(name = "bubblelab", version, about = "Bubble projections, interaction constants and stability experiments")]
struct Cli {
    /// Worker threads for data-parallel loops.
    #[arg(long, global = true, env = "BUBBLELAB_THREADS")]
    threads: Option<usize>,
    /// Run every loop on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bubble profile facts for one dimension.
    Bubble(BubbleArgs),
    /// Projected bubble at the center of the unit ball against its expansion.
    Project(ProjectArgs),
    /// Interaction quantities and structural constants.
    Interact(InteractArgs),
    /// Fit a bubble decomposition to a field stored as CSV.
    Fit(FitArgs),
    /// Run a δ sweep for one regime and write CSV plus a gnuplot script.
    Sweep(SweepArgs),
    /// Run a built-in check suite and print PASS/FAIL lines.
    Verify(VerifyArgs),
}

#[derive(Args, Debug)]
pub struct BubbleArgs {
    #[arg(long)]
    pub n: usize,
    /// Print the structural constants table as CSV.
    #[arg(long)]
    pub constants: bool,
    /// Print the Sobolev constant and bubble energy.
    #[arg(long)]
    pub energy: bool,
    /// Evaluate the unit bubble at these radii.
    #[arg(long, value_delimiter = ',')]
    pub radii: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct ProjectArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_parser = parse_kind)]
    pub kind: ProjectionKind,
    /// `λ` as a fraction of the first Dirichlet eigenvalue; required for pu2.
    #[arg(long)]
    pub lambda_frac: Option<f64>,
    /// Bubble scales; three or more also report the fitted defect exponent.
    #[arg(long, visible_alias = "delta-sweep", value_delimiter = ',', required = true)]
    pub delta: Vec<f64>,
    /// Domain is the unit ball (the only supported domain here).
    #[arg(long)]
    pub ball: bool,
    /// Also compare the harmonic projection with its closed form at the center.
    #[arg(long)]
    pub center: bool,
    #[arg(long, default_value_t = 4000)]
    pub cells: usize,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the projected bubble at the first scale as a field CSV.
    #[arg(long)]
    pub field: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct InteractArgs {
    #[arg(long)]
    pub n: usize,
    /// Pair `δ₁,δ₂,distance` for bubbles placed along the first axis.
    #[arg(long, value_delimiter = ',')]
    pub pair: Vec<f64>,
    #[arg(long)]
    pub constants: bool,
    /// Sampled elementary inequalities.
    #[arg(long)]
    pub inequalities: bool,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Field CSV as written by the library.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub nu: usize,
    #[arg(long, value_parser = parse_kind)]
    pub kind: ProjectionKind,
    #[arg(long)]
    pub lambda_frac: Option<f64>,
    #[arg(long, default_value_t = 6)]
    pub starts: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// TOML manifest; flags below override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Regime label such as `n3-interior-u0zero-pu2`.
    #[arg(long)]
    pub regime: Option<String>,
    #[arg(long, value_delimiter = ',')]
    pub deltas: Option<Vec<f64>>,
    #[arg(long)]
    pub lambda_frac: Option<f64>,
    #[arg(long)]
    pub cells: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    /// Exit with code 4 when the fitted exponent misses the reference by more.
    #[arg(long)]
    pub tolerance: Option<f64>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long, value_parser = ["appendix-a", "constants", "expansion"])]
    pub suite: String,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 100_000)]
    pub samples: usize,
}

fn parse_kind(s: &str) -> Result<ProjectionKind, String> {
    s.parse().map_err(|e: bubblelab::Error| e.to_string())
}

fn run(cli: Cli) -> Result<(), CliError> {
    let exec = if cli.sequential { Execution::Sequential } else { Execution::Parallel };
    with_thread_cap(cli.threads, move || match cli.command {
        Command::Bubble(a) => commands::bubble(&a),
        Command::Project(a) => commands::project(&a),
        Command::Interact(a) => commands::interact(&a, exec),
        Command::Fit(a) => commands::fit(&a, exec),
        Command::Sweep(a) => commands::sweep(&a, exec),
        Command::Verify(a) => commands::verify(&a, exec),
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
