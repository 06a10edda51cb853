use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "persuade",
    version,
    about = "Public signaling schemes for multi-receiver Bayesian persuasion"
)]
pub struct Cli {
    #[command(flatten)]
    pub globals: Globals,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Globals {
    /// Seed for generators and randomized checks.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Persuasiveness slack for eps mode and the grid algorithm.
    #[arg(long, global = true, default_value_t = 0.1)]
    pub eps: f64,
    /// Failure probability for the grid resolution; defaults to eps.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Exact)]
    pub mode: ModeArg,
    /// Largest grid the bicriteria solver may build.
    #[arg(long, global = true, default_value_t = persuade_core::bicriteria::DEFAULT_GRID_CAP)]
    pub grid_cap: u64,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Write the output here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Drop the type weights from the auction LP objective.
    #[arg(long, global = true)]
    pub paper_literal_objective: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Exact,
    Eps,
    Cce,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CceMethod {
    Exact,
    Cutting,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FunctionArg {
    Coverage,
    Cut,
    Submodular,
    Indicator,
    Linear,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate an instance, reduction spec, auction or set function.
    Gen {
        /// random-uniform, example-3-1, cce-reduction, supermodular-indicator,
        /// random-coverage, random-cut or random-auction.
        kind: String,
        #[arg(long, default_value_t = 4)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        states: usize,
        #[arg(long, default_value_t = 1)]
        types: usize,
    },
    /// Check an instance; eps mode also bounds payoffs by 1.
    Validate { instance: PathBuf },
    /// Check a scheme (or a report containing one) against an instance.
    Verify { instance: PathBuf, scheme: PathBuf },
    /// Optimal scheme over all signals.
    SolveExact { instance: PathBuf },
    /// Optimal persuasive scheme over the arrangement cells.
    SolveFpt {
        instance: PathBuf,
        #[arg(long, default_value_t = persuade_core::arrangement::DEFAULT_CELL_CAP)]
        cell_cap: u64,
    },
    /// Cells of the receivers' payoff arrangement as CSV.
    Cells { instance: PathBuf },
    /// Approximate eps-persuasive scheme from the grid algorithm.
    SolveBicriteria { instance: PathBuf },
    /// Optimal cce-persuasive scheme.
    SolveCce {
        instance: PathBuf,
        #[arg(long, value_enum, default_value_t = CceMethod::Cutting)]
        method: CceMethod,
        #[arg(long)]
        max_rounds: Option<usize>,
    },
    /// Cross-check a reduction spec against the brute-force marginal LP.
    CceReduction {
        #[arg(long)]
        spec: PathBuf,
    },
    /// Revenue-optimal public scheme for a second-price auction.
    SolveAuction {
        auction: PathBuf,
        /// Also solve over every ranking combination and report both.
        #[arg(long)]
        brute_force: bool,
    },
    /// Stability bound sweep as CSV.
    Stability {
        #[arg(long, value_enum)]
        function: Option<FunctionArg>,
        /// Set function JSON, used instead of --function.
        #[arg(long)]
        function_file: Option<PathBuf>,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Solve with the arrangement and the exact solver and pair the results.
    Compare {
        instance: PathBuf,
        #[arg(long, default_value_t = persuade_core::arrangement::DEFAULT_CELL_CAP)]
        cell_cap: u64,
    },
}
