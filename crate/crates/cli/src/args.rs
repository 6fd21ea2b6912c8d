use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "evodiff", version, about = "Information diffusion as a graphical evolutionary game")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a graph and write it as an edge list
    Generate(GenerateArgs),
    /// Run a simulation ensemble and compare it with the predicted stable state
    Simulate(SimulateArgs),
    /// Predict stable states from the closed-form results
    Predict(PredictArgs),
    /// Repeat predict/simulate over a list of degrees, alphas or payoff presets
    Sweep(SweepArgs),
    /// Classify the fixed points of the pair dynamics
    Stability(StabilityArgs),
    /// Turn an observed stable state into a payoff constraint
    Invert(InvertArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Family {
    Regular,
    Er,
    Ba,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Rule {
    Im,
    Bd,
    Db,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Record,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    Degree,
    Alpha,
    Payoff,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Mode {
    #[default]
    Exact,
    LargeK,
}

#[derive(Debug, Clone, Args)]
pub struct GraphArgs {
    /// Generator family
    #[arg(long, value_enum, conflicts_with = "edges")]
    pub family: Option<Family>,
    /// Number of users
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Degree of a regular graph
    #[arg(long)]
    pub k: Option<usize>,
    /// Edges attached per new node (BA)
    #[arg(long)]
    pub m: Option<usize>,
    /// Mean degree (ER target; BA override for the prediction)
    #[arg(long)]
    pub kavg: Option<f64>,
    /// Edge-list file instead of a generator
    #[arg(long, value_name = "PATH")]
    pub edges: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PayoffArgs {
    /// Payoff preset PM1..PM4
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4), conflicts_with_all = ["uff", "ufn", "unn"])]
    pub pm: Option<u8>,
    #[arg(long, requires_all = ["ufn", "unn"])]
    pub uff: Option<f64>,
    #[arg(long, requires_all = ["uff", "unn"])]
    pub ufn: Option<f64>,
    #[arg(long, requires_all = ["uff", "ufn"])]
    pub unn: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
    /// Write the report here instead of standard output
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ExecArgs {
    /// Selection intensity
    #[arg(long, default_value_t = 0.1)]
    pub alpha: f64,
    /// Update rule (default: IM on regular graphs, BD otherwise)
    #[arg(long, value_enum)]
    pub rule: Option<Rule>,
    #[arg(long, default_value_t = 100)]
    pub runs: usize,
    /// Regenerate the graph every this many runs
    #[arg(long, default_value_t = 20)]
    pub regen_every: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5)]
    pub initial_pf: f64,
    /// Generation budget per run
    #[arg(long, default_value_t = 2000)]
    pub max_gens: u64,
    /// Generations compared by the steadiness test
    #[arg(long, default_value_t = 50)]
    pub window: usize,
    /// Steadiness tolerance on the half-window means
    #[arg(long, default_value_t = 5e-3)]
    pub tol: f64,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Edge-list destination (standard output when absent)
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub payoff: PayoffArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
    #[command(flatten)]
    pub output: OutputArgs,
    /// Also write the trajectory of the first run as CSV
    #[arg(long, value_name = "PATH")]
    pub trajectory: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub payoff: PayoffArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: Axis,
    /// Comma-separated values for the axis
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub values: Vec<f64>,
    /// Theory only
    #[arg(long)]
    pub no_sim: bool,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub payoff: PayoffArgs,
    #[command(flatten)]
    pub exec: ExecArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct StabilityArgs {
    #[command(flatten)]
    pub graph: GraphArgs,
    #[command(flatten)]
    pub payoff: PayoffArgs,
    /// Selection intensity used to evaluate the drifts (default: min(1e-4, 0.01 / k^2))
    #[arg(long)]
    pub probe_alpha: Option<f64>,
    /// Classify this point `p_f,p_ff` instead of the predicted fixed points
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub point: Option<Vec<f64>>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct InvertArgs {
    /// Observed stable fraction of forwarding users
    #[arg(long)]
    pub pstar: f64,
    #[arg(long, value_enum, default_value_t = Mode::Exact)]
    pub mode: Mode,
    /// Degree of the interaction graph
    #[arg(long, default_value_t = 499, conflicts_with = "edges")]
    pub k: usize,
    /// Measure the effective degree from an edge list
    #[arg(long, value_name = "PATH")]
    pub edges: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}
