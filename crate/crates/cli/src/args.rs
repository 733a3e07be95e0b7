use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser, Serialize)]
#[command(name = "decoyforge", version, about = "Cost-bounded observation alteration synthesis")]
pub struct Cli {
    /// Seed for every random choice (simulation, random instances).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Check a scenario against every well-formedness rule.
    Validate(ValidateArgs),
    /// Reach probability and cost of one alteration.
    Verify(VerifyArgs),
    /// Search for the best alteration within the budget.
    Optimize(OptimizeArgs),
    /// Write the MILP in LP format.
    ExportLp(ExportArgs),
    /// Generate a benchmark scenario.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Sizes of the scenario, its product and its MILP.
    Stats(StatsArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct ScenarioArg {
    /// Scenario file, `-` for stdin.
    #[arg(long, default_value = "-")]
    pub scenario: String,
    /// Override the scenario budget.
    #[arg(long)]
    pub budget: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct OutputArg {
    /// `table`, `csv`, or `csv:<path>` (table on stdout, CSV to the file).
    #[arg(long, default_value = "table", value_parser = parse_output)]
    pub out: Output,
    /// Report 0.000 seconds so repeated runs give identical output.
    #[arg(long)]
    pub no_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Output {
    Table,
    Csv,
    CsvFile(PathBuf),
}

fn parse_output(s: &str) -> Result<Output, String> {
    match s {
        "table" => Ok(Output::Table),
        "csv" => Ok(Output::Csv),
        _ => match s.strip_prefix("csv:") {
            Some(path) if !path.is_empty() => Ok(Output::CsvFile(PathBuf::from(path))),
            _ => Err(format!("expected table, csv or csv:<path>, got `{s}`")),
        },
    }
}

#[derive(Debug, Args, Serialize)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub input: ScenarioArg,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Solver {
    Auto,
    Direct,
    Iterative,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub input: ScenarioArg,
    /// `from->to;...` pairs; unlisted observations keep their identity.
    #[arg(long, default_value = "identity")]
    pub alt: String,
    #[arg(long, value_enum, default_value_t = Solver::Auto)]
    pub solver: Solver,
    /// Also estimate the probability from this many simulated executions.
    #[arg(long)]
    pub simulate: Option<u64>,
    /// Steps per simulated execution; defaults to 100·|S||N|.
    #[arg(long, requires = "simulate")]
    pub horizon: Option<usize>,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Branch and bound over observations.
    Bb,
    /// Exhaustive enumeration.
    Brute,
    /// Export the MILP and solve it with an external solver.
    Milp,
}

#[derive(Debug, Args, Serialize)]
pub struct OptimizeArgs {
    #[arg(long, default_value = "-")]
    pub scenario: String,
    #[arg(long, value_enum, default_value_t = Method::Bb)]
    pub method: Method,
    /// Budget to optimize for; defaults to the scenario budget.
    #[arg(long, conflicts_with = "sweep")]
    pub budget: Option<f64>,
    /// Comma-separated ascending budgets, one result row each.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Option<Vec<f64>>,
    #[arg(long)]
    pub max_nodes: Option<u64>,
    #[arg(long)]
    pub max_seconds: Option<f64>,
    /// Largest observation count brute force will enumerate.
    #[arg(long, default_value_t = decoyforge_core::optimizer::BRUTE_FORCE_MAX_OBS)]
    pub max_obs: usize,
    /// External MILP solver command for `--method milp`.
    #[arg(long, env = "DECOYFORGE_SOLVER")]
    pub solve_external: Option<String>,
    /// Drop unreachable triples from the MILP.
    #[arg(long)]
    pub prune: bool,
    #[command(flatten)]
    pub output: OutputArg,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportArgs {
    #[command(flatten)]
    pub input: ScenarioArg,
    /// LP file to write; stdout when absent.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Create every `l` variable instead of only those on a transition.
    #[arg(long)]
    pub dense: bool,
    #[arg(long)]
    pub prune: bool,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GenCommand {
    /// Grid navigation scenario with range sensors.
    Grid(GridArgs),
    /// Reduction scenario of a 0/1 knapsack instance.
    Knapsack(KnapsackArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct GridArgs {
    #[arg(long, default_value_t = 5)]
    pub n: usize,
    #[arg(long, default_value_t = 1.0)]
    pub budget: f64,
    /// Forbid altering the blank observation.
    #[arg(long)]
    pub freeze_blank: bool,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct KnapsackArgs {
    #[arg(long, value_delimiter = ',', conflicts_with = "items", requires = "values")]
    pub weights: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', requires = "weights")]
    pub values: Option<Vec<f64>>,
    /// Draw this many items with integer weights and values from the seed.
    #[arg(long, required_unless_present = "weights")]
    pub items: Option<usize>,
    #[arg(long, default_value_t = 10, requires = "items")]
    pub max_weight: u64,
    #[arg(long, default_value_t = 20, requires = "items")]
    pub max_value: u64,
    /// Defaults to half the total weight, rounded down.
    #[arg(long)]
    pub capacity: Option<f64>,
    /// Defaults to half the total value, rounded down.
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[command(flatten)]
    pub input: ScenarioArg,
    #[command(flatten)]
    pub output: OutputArg,
}
