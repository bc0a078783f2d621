use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lqar_core::SigmaRule;

#[derive(Debug, Parser)]
#[command(name = "lqar", version, about = "Robust and classical estimation for regression with AR(p) errors")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model and write a JSON report.
    Fit(FitArgs),
    /// Evaluate RAIC over a q grid.
    SelectQ(SelectQArgs),
    /// Run a Monte Carlo study described by a TOML file.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file with a header row, or `builtin:belgium`.
    #[arg(long)]
    pub input: String,
    /// Response column.
    #[arg(long)]
    pub response: Option<String>,
    /// Comma-separated covariate columns.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Prepend a constant column.
    #[arg(long)]
    pub intercept: bool,
    #[arg(long, default_value_t = ',')]
    pub delimiter: char,
    /// AR order p.
    #[arg(long, short = 'p', default_value_t = 1)]
    pub ar_order: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SolverArgs {
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = SigmaRuleArg::Literal)]
    pub sigma_rule: SigmaRuleArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SigmaRuleArg {
    Literal,
    EstimatingEquation,
}

impl From<SigmaRuleArg> for SigmaRule {
    fn from(a: SigmaRuleArg) -> Self {
        match a {
            SigmaRuleArg::Literal => SigmaRule::Literal,
            SigmaRuleArg::EstimatingEquation => SigmaRule::EstimatingEquation,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Cml,
    Cmlq,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Cml)]
    pub method: MethodArg,
    /// Tuning parameter, or `auto` for the RAIC search.
    #[arg(long, default_value = "auto")]
    pub q: String,
    /// q grid for `--q auto`: `start:end:step` or a comma list.
    #[arg(long)]
    pub grid: Option<String>,
    /// Confidence level of the intervals.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
    /// Report path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SelectQArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    #[arg(long)]
    pub grid: Option<String>,
    /// JSON result path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Two-column `q,raic` CSV.
    #[arg(long)]
    pub curve: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// Study description (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
    /// JSON report path; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Summary table CSV (Estimates, Bias, RMSE, SE, CIL, CIU per parameter).
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Per-replication estimates CSV.
    #[arg(long)]
    pub replications: Option<PathBuf>,
}
