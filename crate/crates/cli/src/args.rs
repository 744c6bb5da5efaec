use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "replicate", version, about = "Selection-adjusted replicability analysis of study pairs")]
pub struct Cli {
    /// Study CSV (one row per arm).
    #[arg(long, global = true)]
    pub input: Option<PathBuf>,

    /// Output file; a manifest is written next to it. Defaults to stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,

    /// Only print errors on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,

    /// File of `key = value` lines mirroring the long flags; flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Parse and classify the input; report eligibility counts.
    Validate(Selection),
    /// Directional FDP estimates and upper bounds.
    Fdp(FdpArgs),
    /// Selective tests and intervals for the effect shift.
    Shift(ShiftArgs),
    /// Fraction of effects that declined, over a grid of rho.
    Decline(DeclineArgs),
    /// Bias curves or the ground-truth validation harnesses.
    Simulate(SimulateArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Validate(_) => "validate",
            Command::Fdp(_) => "fdp",
            Command::Shift(_) => "shift",
            Command::Decline(_) => "decline",
            Command::Simulate(_) => "simulate",
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Selection {
    /// Significance threshold that selected the originals.
    #[arg(long, default_value_t = 0.05)]
    pub alpha0: f64,

    /// Smallest t/F degrees of freedom treated as z-approximable.
    #[arg(long, default_value_t = 30.0)]
    pub min_df: f64,

    #[arg(long, default_value = "1")]
    pub schema_version: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Original,
    Replication,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Internal,
    External,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FdpArgs {
    #[command(flatten)]
    pub selection: Selection,

    #[arg(long, value_enum, default_value_t = Source::Original)]
    pub source: Source,

    /// Internal when alpha >= alpha0, external otherwise.
    #[arg(long, value_enum)]
    pub method: Option<Method>,

    /// Comma-separated thresholds; one output row each.
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub alpha: Vec<f64>,

    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,

    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ShiftArgs {
    #[command(flatten)]
    pub selection: Selection,

    /// Interval level; tests reject at `1 - level`.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,

    /// Condition on selection (the default).
    #[arg(long, conflicts_with = "unadjusted")]
    pub adjusted: bool,

    /// Ignore selection.
    #[arg(long)]
    pub unadjusted: bool,

    /// `bh:<q>` or `holm:<alpha>`, comma-separated.
    #[arg(long, value_delimiter = ',', default_value = "bh:0.10,holm:0.05")]
    pub multiplicity: Vec<String>,

    /// Grid-check the conditional cdf for monotonicity before inverting.
    #[arg(long)]
    pub check_monotone: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DeclineArgs {
    #[command(flatten)]
    pub selection: Selection,

    /// `start:end:step`.
    #[arg(long, default_value = "0:1:0.05")]
    pub rho_grid: String,

    #[arg(long, default_value_t = 0.5)]
    pub lambda: f64,

    #[arg(long, default_value_t = 0.95)]
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioArg {
    Example1,
    Validation,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = ScenarioArg::Example1)]
    pub scenario: ScenarioArg,

    /// Monte Carlo trials per grid point or setting.
    #[arg(long, default_value_t = 10_000)]
    pub trials: u64,

    /// `start:end:step` for the example1 curves.
    #[arg(long, default_value = "0:5:0.05")]
    pub theta_grid: String,
}
