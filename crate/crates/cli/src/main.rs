//! `rankmap` command-line front end.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "rankmap", version, about = "Sparse low-rank factorization and factored Gram solvers")]
pub struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, env = "RANKMAP_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Threads used for decomposition and the simulated worker count.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    pub workers: u32,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic data matrix.
    Gen(GenArgs),
    /// Factor a data matrix and write the factor files.
    Decompose(DecomposeArgs),
    /// Run a solver on the full or factored Gram operator.
    Solve {
        #[command(subcommand)]
        solver: SolveCommand,
    },
    /// Pick the largest decomposition tolerance that meets a learning-error target.
    Tune(TuneArgs),
    /// Desk-scale experiment tables.
    Bench {
        #[command(subcommand)]
        table: BenchCommand,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    #[value(name = "low_rank", alias = "low-rank")]
    LowRank,
    #[value(name = "union_of_subspaces", alias = "union-of-subspaces")]
    UnionOfSubspaces,
    #[value(name = "block_diagonal_v", alias = "block-diagonal-v")]
    BlockDiagonalV,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    #[arg(long, value_enum)]
    pub kind: Kind,
    #[arg(long)]
    pub m: usize,
    #[arg(long)]
    pub n: usize,
    /// Rank, or dimension of each subspace or block.
    #[arg(long)]
    pub rank: usize,
    /// Number of subspaces or diagonal blocks.
    #[arg(long, default_value_t = 4)]
    pub subspaces: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    /// Output file; `.mtx` writes Matrix Market, anything else raw f64.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Also write per-column subspace labels as CSV.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CssdArgs {
    #[arg(long, default_value_t = 0.0)]
    pub delta_d: f64,
    /// Column cap; defaults to `min(m, n)`.
    #[arg(long)]
    pub max_cols: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Non-zero cap per column of V.
    #[arg(long)]
    pub max_atoms: Option<usize>,
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    pub input: PathBuf,
    #[command(flatten)]
    pub cssd: CssdArgs,
    /// Directory for the factor files and report.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Matrix,
    Graph,
    Full,
}

#[derive(Debug, Args)]
pub struct OperatorArgs {
    /// Directory written by `decompose` or `tune`.
    #[arg(long)]
    pub factors: Option<PathBuf>,
    /// Data matrix; needed for the full operator.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Execution model; without it the factored operator runs serially.
    #[arg(long, value_enum, conflicts_with = "full")]
    pub model: Option<Model>,
    /// Shorthand for `--model full`.
    #[arg(long)]
    pub full: bool,
    #[arg(long, default_value_t = 1000)]
    pub max_iters: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum SolveCommand {
    /// ℓ1-regularized least squares by FISTA.
    Fista {
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long, default_value_t = 0.1)]
        lambda: f64,
        /// Plain iterative soft thresholding.
        #[arg(long)]
        no_momentum: bool,
        /// Signal file, read as a single column.
        #[arg(long, required_unless_present = "column", conflicts_with = "column")]
        signal: Option<PathBuf>,
        /// Use column `j` of `--data` as the signal.
        #[arg(long, requires = "data")]
        column: Option<usize>,
    },
    /// Leading eigenpairs by power iteration with deflation.
    Power {
        #[command(flatten)]
        op: OperatorArgs,
        #[arg(long, default_value_t = 5)]
        eigs: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Evaluator {
    Eigen,
    Fista,
}

#[derive(Debug, Args)]
pub struct TuneArgs {
    pub input: PathBuf,
    #[arg(long)]
    pub target_delta_l: f64,
    #[arg(long, value_enum, default_value_t = Evaluator::Eigen)]
    pub evaluator: Evaluator,
    /// Eigenvalues compared by the eigen evaluator.
    #[arg(long, default_value_t = 5)]
    pub eigs: usize,
    /// Random signals solved by the fista evaluator.
    #[arg(long, default_value_t = 10)]
    pub probes: usize,
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.4)]
    pub delta_d_max: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub delta_d_min: f64,
    #[arg(long)]
    pub max_cols: Option<usize>,
    /// Evaluate every tolerance at once and keep the largest that qualifies.
    #[arg(long)]
    pub parallel: bool,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum BenchCommand {
    /// Factor at each tolerance and score the leading eigenvalues.
    Sweep {
        input: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.4, 0.2, 0.1, 0.05, 0.001])]
        deltas: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        eigs: usize,
        #[arg(long)]
        max_cols: Option<usize>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Matrix and graph execution models over several worker counts.
    Models {
        #[arg(long)]
        factors: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4, 8])]
        workers_list: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        iterations: usize,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Stored entries of the original, least-squares and sparse representations.
    Memory {
        input: PathBuf,
        #[command(flatten)]
        cssd: CssdArgs,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
