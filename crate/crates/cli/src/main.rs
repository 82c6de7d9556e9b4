mod commands;
mod config;
mod error;
mod eval;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "egen",
    version,
    about = "Equivalent-expression corpora from e-graph saturation, and embedding evaluation"
)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Saturate one expression; print the report and the extracted grammar.
    Saturate {
        #[arg(long, allow_hyphen_values = true)]
        expr: String,
    },
    /// Build the cluster for one seed expression.
    Cluster {
        #[arg(long, allow_hyphen_values = true)]
        expr: String,
    },
    /// Build clusters, pairs and triplets for every seed.
    Corpus {
        /// Extra seeds, one prefix or s-expression per line.
        #[arg(long)]
        expr_list: Option<PathBuf>,
        /// Triplets to sample; defaults to one per expression.
        #[arg(long)]
        triplets: Option<usize>,
    },
    /// Ordered equivalent pairs from a cluster file.
    Pairs {
        #[arg(long)]
        clusters: PathBuf,
    },
    /// Anchor/positive/negative triplets from a cluster file.
    Triplets {
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long)]
        count: Option<usize>,
    },
    /// Rewrite chains with injected mistakes.
    Derive {
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = 0.2)]
        mistake_prob: f64,
        #[arg(long, default_value_t = 4)]
        min_steps: usize,
        #[arg(long, default_value_t = 8)]
        max_steps: usize,
    },
    /// Seven-way multiple-choice equivalence tests.
    SelectTests {
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long, default_value_t = 100)]
        count: usize,
    },
    /// Cluster-level train/test split.
    Split {
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long, default_value_t = 0.2)]
        fraction: f64,
    },
    /// Re-check every cluster member against its seed numerically.
    Verify {
        #[arg(long)]
        clusters: PathBuf,
    },
    /// Mean saturation and extraction time per seed.
    Bench {
        #[arg(long)]
        expr_list: Option<PathBuf>,
        /// Only the first N seeds.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Evaluate an embedding table.
    #[command(subcommand)]
    Eval(eval::EvalCommand),
    /// Embeddings that encode cluster membership, for testing the evaluators.
    SynthEmbed {
        #[arg(long)]
        clusters: Option<PathBuf>,
        /// Embed derivation steps instead, mistakes pointing elsewhere.
        #[arg(long)]
        derivations: Option<PathBuf>,
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long, default_value_t = 0.01)]
        sigma: f64,
        /// Also write this many analogy tests built from the clusters.
        #[arg(long)]
        algebra_tests: Option<usize>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::resolve(&cli.overrides)?;
    match cli.command {
        Command::Saturate { expr } => commands::saturate(&cfg, &expr),
        Command::Cluster { expr } => commands::cluster(&cfg, &expr),
        Command::Corpus { expr_list, triplets } => commands::corpus(&cfg, expr_list.as_deref(), triplets),
        Command::Pairs { clusters } => commands::pairs(&cfg, &clusters),
        Command::Triplets { clusters, count } => commands::triplets(&cfg, &clusters, count),
        Command::Derive {
            clusters,
            count,
            mistake_prob,
            min_steps,
            max_steps,
        } => commands::derive(&cfg, &clusters, count, mistake_prob, min_steps..=max_steps),
        Command::SelectTests { clusters, count } => commands::select_tests(&cfg, &clusters, count),
        Command::Split { clusters, fraction } => commands::split(&cfg, &clusters, fraction),
        Command::Verify { clusters } => commands::verify(&clusters),
        Command::Bench { expr_list, limit } => commands::bench(&cfg, expr_list.as_deref(), limit),
        Command::Eval(e) => eval::run(&cfg, e),
        Command::SynthEmbed {
            clusters,
            derivations,
            dim,
            sigma,
            algebra_tests,
        } => eval::synth_embed(
            &cfg,
            clusters.as_deref(),
            derivations.as_deref(),
            dim,
            sigma,
            algebra_tests,
        ),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
