//! `dgcca` command-line tool.
//!
//! Exit codes: 0 on success, 1 when a computation fails (an error JSON goes
//! to stderr), 2 for usage errors.

mod decompose;
mod evaluate;
mod files;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "dgcca", version, about = "Common and distinctive sources of multi-view data")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose views into common and distinctive matrices.
    Decompose(DecomposeArgs),
    /// Run a simulation study.
    Simulate(SimulateArgs),
    /// Score user-supplied matrices.
    #[command(subcommand)]
    Evaluate(EvaluateCommand),
}

#[derive(Args)]
pub struct DecomposeArgs {
    /// Comma-separated view files, variables in rows and samples in columns.
    #[arg(long, value_delimiter = ',', required = true)]
    pub views: Vec<PathBuf>,

    /// Input format (csv, tsv, binary); guessed from each extension if absent.
    #[arg(long)]
    pub format: Option<String>,

    /// Format of the written matrices.
    #[arg(long, default_value = "csv")]
    pub output_format: String,

    /// Significance level used by every selection test.
    #[arg(long, alias = "alpha", default_value_t = 0.05)]
    pub significance: f64,

    /// JSON object with per-step levels: {"L":…, "I0":…, "r_star":…, "delta":…, "sign":…}.
    #[arg(long)]
    pub significance_map: Option<PathBuf>,

    /// Comma-separated signal ranks, one per view (default: selected).
    #[arg(long, value_delimiter = ',')]
    pub ranks: Option<Vec<usize>>,

    /// JSON file with complete first-level parameters; skips selection.
    #[arg(long)]
    pub params: Option<PathBuf>,

    /// Seed for the bootstraps; generated and recorded when absent.
    #[arg(long)]
    pub seed: Option<u64>,

    /// Resamples for the sign bootstrap.
    #[arg(long, default_value_t = 2000)]
    pub bootstrap: usize,

    /// Resamples for the r* bootstrap.
    #[arg(long, default_value_t = 500)]
    pub rank_bootstrap: usize,

    /// Largest candidate rank of the rank selector.
    #[arg(long)]
    pub k_max: Option<usize>,

    /// Maximum number of hierarchy levels.
    #[arg(long, default_value_t = 1)]
    pub levels: usize,

    /// Stop the hierarchy once every view's remaining common PVE is at or below this.
    #[arg(long, default_value_t = 0.0)]
    pub pve_floor: f64,

    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Setup: 1.1, 1.2, 2.1 or 2.2.
    #[arg(long)]
    pub setup: String,

    /// Pairwise canonical angle in degrees (setups 1.x).
    #[arg(long, default_value_t = 50.0)]
    pub theta: f64,

    #[arg(long, default_value_t = 600)]
    pub p1: usize,

    /// Noise variance of view 1.
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,

    #[arg(long, default_value_t = 300)]
    pub n: usize,

    #[arg(long, default_value_t = 100)]
    pub reps: usize,

    #[arg(long)]
    pub seed: Option<u64>,

    /// Select nuisance parameters by tests instead of using the true ones.
    #[arg(long)]
    pub select: bool,

    /// Significance level for --select.
    #[arg(long, alias = "significance", default_value_t = 0.05)]
    pub alpha: f64,

    #[arg(long, default_value_t = 2000)]
    pub bootstrap: usize,

    #[arg(long, default_value_t = 500)]
    pub rank_bootstrap: usize,

    /// FDR level of the orthogonal-pair test.
    #[arg(long, default_value_t = 0.05)]
    pub fdr: f64,

    /// Fraction of variables kept by the truncated nDCG.
    #[arg(long, default_value_t = 0.1)]
    pub top_fraction: f64,

    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Subcommand)]
pub enum EvaluateCommand {
    /// Standardized within-group sum of squares of a matrix.
    Swiss {
        #[arg(long)]
        matrix: PathBuf,
        /// One group label per sample (column).
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        format: Option<String>,
    },
    /// Largest eigenvalue of the stacked factor-score covariance.
    Rho1 {
        #[arg(long, value_delimiter = ',', required = true)]
        matrices: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        ranks: Option<Vec<usize>>,
        #[arg(long)]
        format: Option<String>,
    },
    /// Whether some pair of matrices has mutually uncorrelated factors.
    OrthogonalPairs {
        #[arg(long, value_delimiter = ',', required = true)]
        matrices: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        ranks: Option<Vec<usize>>,
        #[arg(long, default_value_t = 0.05)]
        fdr: f64,
        #[arg(long)]
        format: Option<String>,
    },
    /// Spearman correlation and nDCG of an estimated ranking.
    RankQuality {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        /// Column to read (header name); default is the last column.
        #[arg(long)]
        column: Option<String>,
        #[arg(long, default_value_t = 0.1)]
        top_fraction: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            return report(dgcca::Error::Config("--threads must be at least 1".into()));
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            return report(dgcca::Error::Config(format!("thread pool: {e}")));
        }
    }
    let result = match cli.command {
        Command::Decompose(a) => decompose::run(&a),
        Command::Simulate(a) => simulate::run(&a),
        Command::Evaluate(c) => evaluate::run(&c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: dgcca::Error) -> ExitCode {
    let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
    eprintln!("{body}");
    ExitCode::from(1)
}
