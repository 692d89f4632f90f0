use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "coagem",
    version,
    about = "Coagulation with emission: simulation, solvers and exact solutions"
)]
pub struct Cli {
    /// Directory for output files.
    #[arg(long, global = true, env = "COAGEM_OUT_DIR", default_value = ".")]
    pub out_dir: PathBuf,
    /// Stem for output file names; defaults to the subcommand name.
    #[arg(long, global = true)]
    pub name: Option<String>,
    /// JSON object of subcommand options. Flags given on the command line
    /// take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Worker threads for replica ensembles and heat maps.
    #[arg(long, global = true, env = "COAGEM_WORKERS")]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the finite-N Markov chain.
    Simulate(SimulateArgs),
    /// Integrate the kinetic equations.
    Solve(SolveArgs),
    /// Exact polynomial or recursive solutions.
    Exact(ExactArgs),
    /// Moment closed forms next to the moment hierarchy.
    Moments(MomentsArgs),
    /// Reaction classes and reaction numbers.
    Classes(ClassesArgs),
    /// Exhaustion times over the three-species simplex.
    Heatmap(HeatmapArgs),
    /// Sup-norm deviations between two output CSVs.
    Compare(CompareArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Solve(_) => "solve",
            Command::Exact(_) => "exact",
            Command::Moments(_) => "moments",
            Command::Classes(_) => "classes",
            Command::Heatmap(_) => "heatmap",
            Command::Compare(_) => "compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GelPolicyArg {
    ZiffStell,
    Stockmayer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SystemArg {
    Small,
    Large,
    Truncated,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EngineArg {
    /// Polynomials for dimers with ell = 1, otherwise the recursive formula.
    Auto,
    Poly,
    Iterate,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    pub ell: usize,
    /// `dimer`, `kmer:<k>` or `<size>:<fraction>,...`.
    #[arg(long, default_value = "dimer")]
    pub init: String,
    /// Initial number of clusters N.
    #[arg(long, default_value_t = 1_000_000)]
    pub clusters: u64,
    #[arg(long, default_value_t = 0.6)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    pub record_dt: f64,
    #[arg(long, value_enum, default_value_t = GelPolicyArg::ZiffStell)]
    pub gel_policy: GelPolicyArg,
    /// Size from which a cluster counts as gel under the Stockmayer policy;
    /// defaults to N / 100.
    #[arg(long)]
    pub stockmayer_threshold: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Independent runs; replica k uses seed + k.
    #[arg(long, default_value_t = 1)]
    pub replicas: u64,
    /// Sizes written as `u_<n>` columns.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
    pub track: Vec<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveArgs {
    #[arg(long, value_enum, default_value_t = SystemArg::Full)]
    pub system: SystemArg,
    #[arg(long, default_value_t = 1)]
    pub ell: usize,
    #[arg(long, default_value = "dimer")]
    pub init: String,
    #[arg(long, default_value_t = 1.0)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    pub record_dt: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-13)]
    pub atol: f64,
    /// Largest represented size for the truncated, full and large systems.
    #[arg(long)]
    pub truncation: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "1,2,3,4,5,6,7,8,9,10")]
    pub track: Vec<usize>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactArgs {
    #[arg(long, default_value_t = 1)]
    pub ell: usize,
    #[arg(long, default_value = "dimer")]
    pub init: String,
    #[arg(long, default_value_t = 10)]
    pub n_max: usize,
    #[arg(long, default_value_t = 0.6)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    pub record_dt: f64,
    #[arg(long, value_enum, default_value_t = EngineArg::Auto)]
    pub engine: EngineArg,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsArgs {
    /// Monodisperse initial size.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 1)]
    pub ell: usize,
    /// Highest moment in the hierarchy.
    #[arg(long, default_value_t = 3)]
    pub k_max: usize,
    #[arg(long, default_value_t = 0.6)]
    pub t_end: f64,
    #[arg(long, default_value_t = 0.01)]
    pub record_dt: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub atol: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassesArgs {
    #[arg(long, default_value_t = 1)]
    pub ell: usize,
    /// Initially occupied sizes.
    #[arg(long, value_delimiter = ',', default_value = "2")]
    pub support: Vec<usize>,
    #[arg(long, default_value_t = 60)]
    pub n_max: usize,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatmapArgs {
    /// Only the three-species system (ell = 3) is covered.
    #[arg(long, default_value_t = 3)]
    pub ell: usize,
    /// Grid points per simplex edge.
    #[arg(long, default_value_t = 21)]
    pub grid: usize,
    #[arg(long, default_value_t = 1e-10)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-13)]
    pub atol: f64,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareArgs {
    #[arg(long)]
    pub a: Option<PathBuf>,
    #[arg(long)]
    pub b: Option<PathBuf>,
    /// Columns to compare; defaults to every shared column except `t`.
    #[arg(long, value_delimiter = ',')]
    pub columns: Vec<String>,
    /// Ignore rows after this time.
    #[arg(long)]
    pub t_max: Option<f64>,
    /// Rows match when their times differ by at most this much.
    #[arg(long, default_value_t = 1e-9)]
    pub time_tol: f64,
}
