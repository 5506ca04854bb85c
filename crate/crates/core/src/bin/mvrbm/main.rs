mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Mixed-variate restricted Boltzmann machines: train, project, predict,
/// retrieve, cluster and check gradients.
#[derive(Debug, Parser)]
#[command(name = "mvrbm", version)]
pub struct Cli {
    /// Worker threads for data-parallel work (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a planted-concept dataset and its schema.
    Synth(SynthArgs),
    /// Train a model and write it with its schema.
    Train(TrainArgs),
    /// Write hidden posteriors and binary codes for every record.
    Project(ProjectArgs),
    /// Rank the tokens of one unit by mean-field prediction.
    Predict(PredictArgs),
    /// Rank corpus records by symmetric KL distance to each query.
    Retrieve(RetrieveArgs),
    /// Cluster binary codes with Hamming k-means.
    Cluster(ClusterArgs),
    /// Compute MAP@k and NDCG@k for retrieval rankings.
    Eval(EvalArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// TOML generator settings; flags below override them.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub concepts: Option<usize>,
    #[arg(long)]
    pub per_concept: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Dataset output (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Schema output.
    #[arg(long)]
    pub schema: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub schema: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// TOML training config; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model output.
    #[arg(long)]
    pub out: PathBuf,
    /// Training log output (default: standard output).
    #[arg(long)]
    pub log: Option<PathBuf>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub cd_steps: Option<usize>,
    #[arg(long)]
    pub persistent: bool,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub groups: Option<usize>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub rho1: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Full-batch ascent on the exact gradient (tiny models only).
    #[arg(long)]
    pub oracle_exact_gradient: bool,
}

#[derive(Debug, Args)]
pub struct ProjectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub rho1: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Categorical or replicated-softmax unit to predict.
    #[arg(long)]
    pub unit: String,
    /// Zero-based record index in the data file.
    #[arg(long, default_value_t = 0)]
    pub record: usize,
    /// Comma-separated candidate tokens (default: the whole vocabulary).
    #[arg(long, value_delimiter = ',')]
    pub candidates: Option<Vec<usize>>,
    /// Report full-vocabulary probabilities instead of renormalizing over
    /// the candidates.
    #[arg(long)]
    pub full_vocabulary: bool,
    /// Remove the unit's observed value before projecting.
    #[arg(long)]
    pub mask: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RetrieveArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Corpus records.
    #[arg(long)]
    pub data: PathBuf,
    /// Query records (default: every corpus record).
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Keep only the first k results per query (default: all).
    #[arg(long)]
    pub k: Option<usize>,
    /// Drop the query itself from its list when querying the corpus.
    #[arg(long)]
    pub exclude_self: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub clusters: usize,
    #[arg(long, default_value_t = 0.5)]
    pub rho1: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    /// Cluster assignments output (default: standard output).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Report with the Rand index against the concept labels.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Rankings written by `retrieve`; otherwise --model and --data are used.
    #[arg(long, conflicts_with_all = ["model", "data", "queries"])]
    pub rankings: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub queries: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    pub k: usize,
    /// Method name written in the report.
    #[arg(long, default_value = "model")]
    pub method: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    /// Model to check; otherwise a random model is built for --schema.
    #[arg(long, conflicts_with = "schema")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    /// Records to evaluate at (default: random records).
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    pub hidden: usize,
    #[arg(long, default_value_t = 1)]
    pub groups: usize,
    #[arg(long, default_value_t = 6)]
    pub records: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(1);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
