mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use planspace::Workspace;

/// Embed floor plans, then search, cluster and deduplicate them.
#[derive(Parser, Debug)]
#[command(name = "planspace", version)]
struct Cli {
    /// Workspace directory (default: $PLANSPACE_WORKSPACE, else the current directory)
    #[arg(long, global = true)]
    workspace: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute target distances into distances.tsv
    Encode(EncodeArgs),
    /// Fit coordinates to distances.tsv, writing embedding.tsv
    Solve(SolveArgs),
    /// Place one new plan with every existing coordinate held fixed
    Insert(InsertArgs),
    /// Nearest or farthest plans to an id or coordinate
    Query(QueryArgs),
    /// k-means over the embedding, writing clusters.tsv
    Cluster(ClusterArgs),
    /// Group near-duplicate plans, writing redundant.tsv
    Prune(PruneArgs),
    /// Stress of the current embedding against distances.tsv
    Stats,
    /// Serve the workspace over HTTP
    Serve(ServeArgs),
    /// Write a synthetic plans.json (and optionally features.tsv)
    Generate(GenerateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Oracle {
    Cosine,
    Iou,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Pairs {
    All,
    Triples,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum IouKind {
    Category,
    Occupancy,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[arg(long, value_enum, default_value_t = Oracle::Iou)]
    oracle: Oracle,
    #[arg(long, value_enum, default_value_t = Pairs::Triples)]
    pairs: Pairs,
    /// Triples drawn per anchor plan
    #[arg(long, default_value_t = 5)]
    per_anchor: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Which cells count as shared for IoU
    #[arg(long, value_enum, default_value_t = IouKind::Category)]
    iou_mode: IouKind,
    /// Confirm an all-pairs run over more than 5000 plans
    #[arg(long)]
    yes: bool,
    /// Output path (default: <workspace>/distances.tsv)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[arg(long, default_value_t = 3)]
    dim: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Relative stress decrease below which a run stops
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    grad_tol: f64,
    /// Half-width of the random start box (default: mean target distance)
    #[arg(long)]
    init_scale: Option<f64>,
    /// Distance table (default: <workspace>/distances.tsv)
    #[arg(long)]
    distances: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct InsertArgs {
    /// Plan document; distances to every embedded plan come from the IoU oracle
    #[arg(long, conflicts_with = "distances", required_unless_present = "distances")]
    plan: Option<PathBuf>,
    /// `id` TAB `dist` lines giving the new point's target distances
    #[arg(long)]
    distances: Option<PathBuf>,
    /// Id for the new point (default: the plan's id, else "new")
    #[arg(long)]
    id: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Extra random starts besides the anchor centroid
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    /// Append the result to embedding.tsv (and the plan to plans.json)
    #[arg(long)]
    save: bool,
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[arg(long, conflicts_with = "coord", required_unless_present = "coord")]
    id: Option<String>,
    /// Comma-separated coordinate, e.g. 0.1,0.2,0.3
    #[arg(long, allow_hyphen_values = true)]
    coord: Option<String>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value = "nearest")]
    order: planspace::Order,
}

#[derive(Args, Debug)]
struct ClusterArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = planspace::cluster::DEFAULT_MAX_ITERS)]
    max_iters: usize,
}

#[derive(Args, Debug)]
struct PruneArgs {
    #[arg(long, default_value_t = planspace::prune::DEFAULT_THRESHOLD)]
    threshold: usize,
    #[arg(long, default_value_t = planspace::plan::DEFAULT_RESOLUTION)]
    resolution: usize,
}

#[derive(Args, Debug)]
struct ServeArgs {
    #[arg(long, default_value_t = planspace_server::DEFAULT_PORT)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Static client files (default: <workspace>/ui)
    #[arg(long)]
    ui: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Corpus {
    Random,
    Duplicates,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = Corpus::Random)]
    kind: Corpus,
    /// Plan count for the random corpus
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Base plans in the duplicates corpus
    #[arg(long, default_value_t = 100)]
    bases: usize,
    /// Perturbed copies in the duplicates corpus
    #[arg(long, default_value_t = 20)]
    copies: usize,
    /// Also write features.tsv with one random 1024-vector per plan
    #[arg(long)]
    features: bool,
    /// Overwrite an existing plans.json
    #[arg(long)]
    force: bool,
}

pub enum CliError {
    Usage(String),
    Data(String),
    Convergence(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Convergence(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Convergence(m) => m,
        }
    }
}

impl From<planspace::Error> for CliError {
    fn from(e: planspace::Error) -> Self {
        match e {
            planspace::Error::InvalidParameter(m) => CliError::Usage(m),
            other => CliError::Data(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let workspace = cli
        .workspace
        .map(Workspace::new)
        .unwrap_or_else(Workspace::from_env);
    match commands::run(cli.command, &workspace) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
