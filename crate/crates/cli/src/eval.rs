use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Subcommand;
use egen::corpus::io::{read_jsonl, write_jsonl};
use egen::corpus::{Cluster, Derivation};
use egen::embed::{
    algebra_accuracy, clustering_accuracy, clustering_accuracy_weighted, compute_threshold,
    derivation_oracle_embeddings, detect_mistakes, embedding_algebra, kmeans, oracle_algebra_tests, retrieval_accuracy,
    retrieve_topk, synthetic_oracle_embeddings, AlgebraTest, MistakeScorer, MistakeThreshold, DEFAULT_MAX_ITERS,
};
use egen::EmbeddingTable64;
use serde_json::json;

use crate::commands::{out_file, print_json, read_clusters};
use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::write_manifest;

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// K-means clustering accuracy against cluster membership.
    Kmeans {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        clusters: PathBuf,
        /// Defaults to the number of clusters.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
        max_iters: usize,
        /// Report the per-expression fraction as the headline number.
        #[arg(long)]
        weighted: bool,
    },
    /// Top-k retrieval accuracy, or the ranking for one query.
    Retrieve {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        clusters: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, allow_hyphen_values = true)]
        query: Option<String>,
    },
    /// Threshold mistake detection over derivations.
    Mistakes {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        derivations: PathBuf,
        /// Derivations used to set the threshold; defaults to the evaluated set.
        #[arg(long)]
        calibration: Option<PathBuf>,
        /// Use this threshold instead of computing one.
        #[arg(long, allow_hyphen_values = true)]
        threshold: Option<f64>,
    },
    /// Analogy completion accuracy.
    Algebra {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        tests: PathBuf,
        /// Clusters used to exclude answers equivalent to `x2` or `y_gt`.
        #[arg(long)]
        clusters: Option<PathBuf>,
    },
}

fn load_table(path: &Path) -> Result<EmbeddingTable64, CliError> {
    Ok(EmbeddingTable64::load(path)?)
}

/// Rows of `table` for the clustered expressions, in cluster order.
fn restrict(table: &EmbeddingTable64, clusters: &[Cluster]) -> Result<EmbeddingTable64, CliError> {
    let mut out = EmbeddingTable64::new(table.dim());
    for c in clusters {
        for e in &c.exprs {
            let v = table
                .get(e)
                .ok_or_else(|| CliError::Validation(format!("no embedding for `{e}`")))?;
            if !out.contains(e) {
                out.insert(e, v)?;
            }
        }
    }
    Ok(out)
}

pub fn run(cfg: &RunConfig, cmd: EvalCommand) -> Result<(), CliError> {
    match cmd {
        EvalCommand::Kmeans {
            embeddings,
            clusters,
            k,
            max_iters,
            weighted,
        } => {
            let cs = read_clusters(&clusters)?;
            let table = restrict(&load_table(&embeddings)?, &cs)?;
            let k = k.unwrap_or(cs.len());
            let start = Instant::now();
            let labels = kmeans(&table, k, cfg.seed, max_iters)?;
            let (acc, wacc) = (
                clustering_accuracy(&labels, &cs),
                clustering_accuracy_weighted(&labels, &cs),
            );
            eprintln!(
                "k-means accuracy {acc:.4} (weighted {wacc:.4}) over {} expressions",
                table.len()
            );
            print_json(&json!({
                "metric": "kmeans",
                "k": k,
                "clusters": cs.len(),
                "expressions": table.len(),
                "accuracy": if weighted { wacc } else { acc },
                "unweighted_accuracy": acc,
                "weighted_accuracy": wacc,
                "timing": { "wall_ms": start.elapsed().as_secs_f64() * 1e3 },
            }));
        }
        EvalCommand::Retrieve {
            embeddings,
            clusters,
            k,
            query,
        } => {
            let table = load_table(&embeddings)?;
            if let Some(q) = query {
                let hits = retrieve_topk(&table, &q, k)?;
                let ranked: Vec<_> = hits
                    .iter()
                    .map(|(e, s)| json!({ "expr": e, "similarity": s }))
                    .collect();
                print_json(&json!({ "query": q, "k": k, "results": ranked }));
                return Ok(());
            }
            let clusters = clusters.ok_or_else(|| CliError::Validation("need --clusters or --query".into()))?;
            let cs = read_clusters(&clusters)?;
            let table = restrict(&table, &cs)?;
            let acc = retrieval_accuracy(&table, &cs, k)?;
            eprintln!("top-{k} retrieval accuracy {acc:.4}");
            print_json(&json!({ "metric": "retrieval", "k": k, "expressions": table.len(), "accuracy": acc }));
        }
        EvalCommand::Mistakes {
            embeddings,
            derivations,
            calibration,
            threshold,
        } => {
            let table = load_table(&embeddings)?;
            let ds: Vec<Derivation> = read_jsonl(&derivations)?;
            let (t, used, skipped) = match threshold {
                Some(t) if t.is_finite() => (MistakeThreshold { t }, None, None),
                Some(t) => return Err(CliError::Validation(format!("threshold {t} is not finite"))),
                None => {
                    let cal: Vec<Derivation> = match &calibration {
                        Some(p) => read_jsonl(p)?,
                        None => ds.clone(),
                    };
                    let r = compute_threshold(&cal, &table)?;
                    (r.threshold, Some(r.used), Some(r.skipped))
                }
            };
            let mut scorer = MistakeScorer::default();
            for d in &ds {
                scorer.add(d, &detect_mistakes(d, &table, t)?);
            }
            let report = scorer.report();
            eprintln!(
                "threshold {:.4}: mistake F1 {:.4}, no-mistake F1 {:.4}",
                t.t, report.mistake.f1, report.no_mistake.f1
            );
            print_json(&json!({
                "metric": "mistakes",
                "threshold": t.t,
                "calibration_used": used,
                "calibration_skipped": skipped,
                "derivations": ds.len(),
                "report": report,
            }));
        }
        EvalCommand::Algebra {
            embeddings,
            tests,
            clusters,
        } => {
            let table = load_table(&embeddings)?;
            let mut ts: Vec<AlgebraTest> = read_jsonl(&tests)?;
            if let Some(p) = clusters {
                let cs = read_clusters(&p)?;
                ts = ts.into_iter().map(|t| t.with_exclusions(&cs)).collect();
            }
            let mut predictions = Vec::with_capacity(ts.len());
            for t in &ts {
                let p = embedding_algebra(t, &table)?;
                predictions.push(json!({ "y_gt": t.y_gt, "predicted": p, "correct": p == t.y_gt }));
            }
            let acc = algebra_accuracy(&ts, &table)?;
            eprintln!("algebra accuracy {acc:.4} over {} tests", ts.len());
            print_json(&json!({ "metric": "algebra", "tests": ts.len(), "accuracy": acc, "predictions": predictions }));
        }
    }
    Ok(())
}

pub fn synth_embed(
    cfg: &RunConfig,
    clusters: Option<&Path>,
    derivations: Option<&Path>,
    dim: usize,
    sigma: f64,
    algebra_tests: Option<usize>,
) -> Result<(), CliError> {
    if !sigma.is_finite() || sigma < 0.0 {
        return Err(CliError::Validation(format!(
            "sigma {sigma} must be finite and non-negative"
        )));
    }
    let cs = clusters.map(read_clusters).transpose()?;
    let table: EmbeddingTable64 = match (derivations, &cs) {
        (Some(p), _) => derivation_oracle_embeddings(&read_jsonl::<Derivation>(p)?, dim, sigma, cfg.seed)?,
        (None, Some(cs)) => synthetic_oracle_embeddings(cs, dim, sigma, cfg.seed)?,
        (None, None) => return Err(CliError::Validation("need --clusters or --derivations".into())),
    };
    let path = out_file(cfg, "embeddings.tsv");
    table.save(&path)?;
    write_manifest(&path, "synth-embed", cfg, table.len(), json!({}))?;
    let mut outputs = vec![path];
    if let Some(n) = algebra_tests {
        let cs = cs.ok_or_else(|| CliError::Validation("--algebra-tests needs --clusters".into()))?;
        let tests = oracle_algebra_tests(&cs, n, cfg.seed);
        let ap = out_file(cfg, "algebra_tests.jsonl");
        write_jsonl(&ap, &tests)?;
        write_manifest(&ap, "synth-embed", cfg, tests.len(), json!({}))?;
        outputs.push(ap);
    }
    print_json(&json!({ "expressions": table.len(), "dim": dim, "outputs": outputs }));
    Ok(())
}
