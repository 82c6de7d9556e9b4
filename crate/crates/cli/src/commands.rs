use std::io::Write;
use std::ops::RangeInclusive;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use egen::corpus::io::{read_jsonl, write_jsonl, write_pairs, write_triplets};
use egen::corpus::template::desk_templates;
use egen::corpus::{
    build_cluster, build_corpus, corpus_stats, generate_derivations, instantiate_templates, make_pairs,
    make_selection_tests, make_triplets, parse_templates, split_train_test, Cluster, DerivationConfig, Timing,
};
use egen::egraph::{saturate as run_saturation, EGraph};
use egen::expr::oracle::Oracle;
use egen::expr::Expr;
use egen::grammar::extract_grammar;
use egen::rules::{load_library, RewriteRule};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::write_manifest;

/// Pretty JSON on stdout. A closed pipe is not an error.
pub fn print_json<T: Serialize>(v: &T) {
    let text = serde_json::to_string_pretty(v).expect("output serializes");
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

fn search_dirs() -> Vec<PathBuf> {
    std::env::var_os("EGEN_RULES_DIR")
        .map(|v| std::env::split_paths(&v).collect())
        .unwrap_or_default()
}

pub fn load_rules(cfg: &RunConfig) -> Result<Vec<RewriteRule>, CliError> {
    Ok(load_library(&cfg.rules, &search_dirs())?)
}

fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// Template instantiations, then any listed expressions, without duplicates.
fn load_seeds(cfg: &RunConfig, expr_list: Option<&Path>) -> Result<Vec<Expr>, CliError> {
    let templates = match cfg.templates.as_str() {
        "none" => Vec::new(),
        "desk" => desk_templates(),
        path => {
            parse_templates(&read_text(Path::new(path))?).map_err(|e| CliError::Validation(format!("{path}: {e}")))?
        }
    };
    let mut seeds = instantiate_templates(&templates, cfg.template_cap);
    if let Some(path) = expr_list {
        for (i, line) in read_text(path)?.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let e =
                Expr::parse(line).map_err(|e| CliError::Validation(format!("{}:{}: {e}", path.display(), i + 1)))?;
            if !seeds.contains(&e) {
                seeds.push(e);
            }
        }
    }
    if seeds.is_empty() {
        return Err(CliError::Validation("no seed expressions".into()));
    }
    Ok(seeds)
}

pub fn read_clusters(path: &Path) -> Result<Vec<Cluster>, CliError> {
    Ok(read_jsonl(path)?)
}

pub fn out_file(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out.join(name)
}

pub fn saturate(cfg: &RunConfig, src: &str) -> Result<(), CliError> {
    let rules = load_rules(cfg)?;
    let expr = Expr::parse(src)?;
    let mut g = EGraph::new();
    let root = g.add_expr(&expr).map_err(|e| CliError::Validation(e.to_string()))?;
    let start = Instant::now();
    let report = run_saturation(&mut g, &rules, &cfg.saturation());
    let sat = start.elapsed();
    let grammar = extract_grammar(&g, root).map_err(|e| CliError::Runtime(e.to_string()))?;
    let root = g.find(root);
    let root_productions: Vec<String> = grammar.productions(root).iter().map(ToString::to_string).collect();
    eprintln!(
        "{}: {} after {} iterations, {} e-nodes, {} e-classes",
        expr.to_prefix(),
        report.stop_reason,
        report.iterations,
        report.enodes,
        report.eclasses
    );
    print_json(&json!({
        "expr": expr.to_prefix(),
        "rules": cfg.rules,
        "report": report,
        "grammar": {
            "root": root.to_string(),
            "root_productions": root_productions,
            "nonterminals": grammar.len(),
            "productions": grammar.production_count(),
            "dump": grammar.dump().lines().collect::<Vec<_>>(),
        },
        "timing": { "saturate_ms": ms(sat) },
    }));
    Ok(())
}

pub fn cluster(cfg: &RunConfig, src: &str) -> Result<(), CliError> {
    let rules = load_rules(cfg)?;
    let expr = Expr::parse(src)?;
    let b = build_cluster(&expr, &rules, &cfg.cluster_config());
    eprintln!(
        "{}: {} expressions ({} enumerated, {} dropped by audit)",
        b.cluster.seed,
        b.cluster.exprs.len(),
        b.cluster.meta.enumerated,
        b.cluster.meta.audit_dropped
    );
    print_json(&json!({ "cluster": b.cluster, "timing": timing_json(&[b.timing]) }));
    Ok(())
}

fn timing_json(ts: &[Timing]) -> Value {
    let n = ts.len().max(1) as f64;
    let sat: Duration = ts.iter().map(|t| t.saturate).sum();
    let ext: Duration = ts.iter().map(|t| t.extract).sum();
    json!({
        "seeds": ts.len(),
        "total_saturation_ms": ms(sat),
        "total_extraction_ms": ms(ext),
        "mean_saturation_ms": ms(sat) / n,
        "mean_extraction_ms": ms(ext) / n,
        "mean_extraction_s": ext.as_secs_f64() / n,
    })
}

pub fn corpus(cfg: &RunConfig, expr_list: Option<&Path>, triplet_count: Option<usize>) -> Result<(), CliError> {
    let seeds = load_seeds(cfg, expr_list)?;
    let rules = load_rules(cfg)?;
    let start = Instant::now();
    let built = build_corpus(&seeds, &rules, &cfg.cluster_config(), cfg.jobs);
    let build_time = start.elapsed();
    if built.clusters.is_empty() {
        return Err(CliError::Validation("every seed was degenerate or overlapping".into()));
    }
    let stats = corpus_stats(&built.clusters);

    let clusters_path = out_file(cfg, "clusters.jsonl");
    write_jsonl(&clusters_path, &built.clusters)?;
    let mut timing = timing_json(&built.timings);
    timing["wall_ms"] = json!(ms(build_time));
    write_manifest(&clusters_path, "corpus", cfg, built.clusters.len(), timing)?;

    let t = Instant::now();
    let pairs_path = out_file(cfg, "pairs.tsv");
    let n_pairs = write_pairs(&pairs_path, make_pairs(&built.clusters))?;
    write_manifest(
        &pairs_path,
        "corpus",
        cfg,
        n_pairs,
        json!({ "wall_ms": ms(t.elapsed()) }),
    )?;

    let t = Instant::now();
    let triplets_path = out_file(cfg, "triplets.tsv");
    let count = triplet_count.unwrap_or(stats.expressions);
    let n_triplets = match make_triplets(&built.clusters, cfg.seed, count) {
        Ok(ts) => write_triplets(&triplets_path, &ts)?,
        Err(e) => {
            eprintln!("warning: no triplets: {e}");
            write_triplets(&triplets_path, &[])?
        }
    };
    write_manifest(
        &triplets_path,
        "corpus",
        cfg,
        n_triplets,
        json!({ "wall_ms": ms(t.elapsed()) }),
    )?;

    eprintln!(
        "{} seeds -> {} clusters, {} expressions (mean {:.1}), {} pairs, {} triplets in {:.1}s",
        seeds.len(),
        stats.clusters,
        stats.expressions,
        stats.mean_cluster_size,
        n_pairs,
        n_triplets,
        build_time.as_secs_f64()
    );
    print_json(&json!({
        "seeds": seeds.len(),
        "stats": stats,
        "degenerate_seeds": built.degenerate_seeds,
        "overlapping_seeds": built.overlapping_seeds,
        "pairs": n_pairs,
        "triplets": n_triplets,
        "outputs": [clusters_path, pairs_path, triplets_path],
    }));
    Ok(())
}

pub fn pairs(cfg: &RunConfig, clusters: &Path) -> Result<(), CliError> {
    let cs = read_clusters(clusters)?;
    let path = out_file(cfg, "pairs.tsv");
    let n = write_pairs(&path, make_pairs(&cs))?;
    write_manifest(&path, "pairs", cfg, n, json!({}))?;
    print_json(&json!({ "pairs": n, "output": path }));
    Ok(())
}

pub fn triplets(cfg: &RunConfig, clusters: &Path, count: Option<usize>) -> Result<(), CliError> {
    let cs = read_clusters(clusters)?;
    let count = count.unwrap_or_else(|| cs.iter().map(|c| c.exprs.len()).sum());
    let ts = make_triplets(&cs, cfg.seed, count)?;
    let path = out_file(cfg, "triplets.tsv");
    let n = write_triplets(&path, &ts)?;
    write_manifest(&path, "triplets", cfg, n, json!({}))?;
    print_json(&json!({ "triplets": n, "output": path }));
    Ok(())
}

pub fn derive(
    cfg: &RunConfig,
    clusters: &Path,
    count: Option<usize>,
    mistake_prob: f64,
    steps: RangeInclusive<usize>,
) -> Result<(), CliError> {
    if !(0.0..=1.0).contains(&mistake_prob) {
        return Err(CliError::Validation(format!(
            "mistake probability {mistake_prob} outside [0, 1]"
        )));
    }
    if steps.is_empty() || *steps.start() == 0 {
        return Err(CliError::Validation("step range must be nonempty and positive".into()));
    }
    let cs = read_clusters(clusters)?;
    let rules = load_rules(cfg)?;
    let dcfg = DerivationConfig {
        steps,
        mistake_prob,
        count,
        max_tokens: cfg.token_limit,
        ..DerivationConfig::default()
    };
    let start = Instant::now();
    let ds = generate_derivations(&cs, &rules, cfg.seed, &dcfg)?;
    let path = out_file(cfg, "derivations.jsonl");
    write_jsonl(&path, &ds)?;
    write_manifest(
        &path,
        "derive",
        cfg,
        ds.len(),
        json!({ "wall_ms": ms(start.elapsed()) }),
    )?;
    let mistakes: usize = ds.iter().map(|d| d.mistakes.len()).sum();
    let transitions: usize = ds.iter().map(|d| d.steps.len() - 1).sum();
    print_json(&json!({ "derivations": ds.len(), "transitions": transitions, "mistakes": mistakes, "output": path }));
    Ok(())
}

pub fn select_tests(cfg: &RunConfig, clusters: &Path, count: usize) -> Result<(), CliError> {
    let cs = read_clusters(clusters)?;
    let start = Instant::now();
    let tests = make_selection_tests(&cs, cfg.seed, count)?;
    let path = out_file(cfg, "selection_tests.jsonl");
    write_jsonl(&path, &tests)?;
    write_manifest(
        &path,
        "select-tests",
        cfg,
        tests.len(),
        json!({ "wall_ms": ms(start.elapsed()) }),
    )?;
    print_json(&json!({ "tests": tests.len(), "requested": count, "output": path }));
    Ok(())
}

pub fn split(cfg: &RunConfig, clusters: &Path, fraction: f64) -> Result<(), CliError> {
    let cs = read_clusters(clusters)?;
    let (train, test) = split_train_test(&cs, fraction, cfg.seed)?;
    let (tp, sp) = (out_file(cfg, "train.jsonl"), out_file(cfg, "test.jsonl"));
    write_jsonl(&tp, &train)?;
    write_manifest(&tp, "split", cfg, train.len(), json!({}))?;
    write_jsonl(&sp, &test)?;
    write_manifest(&sp, "split", cfg, test.len(), json!({}))?;
    print_json(&json!({ "train": train.len(), "test": test.len(), "outputs": [tp, sp] }));
    Ok(())
}

#[derive(Debug, Serialize)]
struct Failure {
    cluster_id: usize,
    seed: String,
    expr: String,
    verdict: egen::expr::oracle::Verdict,
}

/// Fails with a validation error if any member is numerically distinct from its seed.
pub fn verify(clusters: &Path) -> Result<(), CliError> {
    let cs = read_clusters(clusters)?;
    let oracle = Oracle::default();
    let (mut checked, mut inconclusive) = (0, 0);
    let mut failures = Vec::new();
    for c in &cs {
        let seed = Expr::parse(&c.seed)?;
        let points = oracle.reference_points(&seed);
        for s in c.exprs.iter().filter(|s| **s != c.seed) {
            let v = oracle.compare_at(&points, &Expr::parse(s)?);
            checked += 1;
            if v.is_not_equivalent() {
                failures.push(Failure {
                    cluster_id: c.cluster_id,
                    seed: c.seed.clone(),
                    expr: s.clone(),
                    verdict: v,
                });
            } else if !v.is_equivalent() {
                inconclusive += 1;
            }
        }
    }
    eprintln!(
        "{checked} rewrites checked: {} not equivalent, {inconclusive} inconclusive",
        failures.len()
    );
    let ok = failures.is_empty();
    print_json(&json!({
        "clusters": cs.len(),
        "checked": checked,
        "not_equivalent": failures.len(),
        "inconclusive": inconclusive,
        "failures": failures,
    }));
    if ok {
        Ok(())
    } else {
        Err(CliError::Validation("verification failed".into()))
    }
}

pub fn bench(cfg: &RunConfig, expr_list: Option<&Path>, limit: Option<usize>) -> Result<(), CliError> {
    let mut seeds = load_seeds(cfg, expr_list)?;
    if let Some(n) = limit {
        seeds.truncate(n);
    }
    let rules = load_rules(cfg)?;
    let start = Instant::now();
    let built = build_corpus(&seeds, &rules, &cfg.cluster_config(), cfg.jobs);
    let wall = start.elapsed();
    let stats = corpus_stats(&built.clusters);
    let t = timing_json(&built.timings);
    eprintln!(
        "{} seeds: mean saturation {:.1} ms, mean extraction {:.3} s, wall {:.1} s",
        built.timings.len(),
        t["mean_saturation_ms"].as_f64().unwrap_or(0.0),
        t["mean_extraction_s"].as_f64().unwrap_or(0.0),
        wall.as_secs_f64()
    );
    print_json(&json!({
        "rules": cfg.rules,
        "seeds": seeds.len(),
        "clusters": stats.clusters,
        "mean_cluster_size": stats.mean_cluster_size,
        "max_nodes": cfg.max_nodes,
        "max_rewrites": cfg.max_rewrites,
        "timing": {
            "mean_saturation_ms": t["mean_saturation_ms"],
            "mean_extraction_ms": t["mean_extraction_ms"],
            "mean_extraction_s": t["mean_extraction_s"],
            "wall_s": wall.as_secs_f64(),
        },
    }));
    Ok(())
}
