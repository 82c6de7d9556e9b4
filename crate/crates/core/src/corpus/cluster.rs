use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;

use super::{Cluster, ClusterMeta};
use crate::egraph::{saturate, EGraph, SaturationLimits};
use crate::expr::oracle::Oracle;
use crate::expr::{Constant, Expr, Op};
use crate::grammar::{enumerate_rewrites, extract_grammar, EnumerationLimits};
use crate::rules::RewriteRule;

#[derive(Debug, Clone)]
pub struct ClusterConfig {
    /// Recorded in cluster metadata.
    pub library: String,
    /// Its time budget is the whole per-seed budget, shared with enumeration.
    pub saturation: SaturationLimits,
    pub enumeration: EnumerationLimits,
    pub audit: bool,
    pub oracle: Oracle,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        ClusterConfig {
            library: "full".into(),
            saturation: SaturationLimits::default(),
            enumeration: EnumerationLimits::default(),
            audit: true,
            oracle: Oracle::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct Timing {
    pub saturate: Duration,
    /// Grammar extraction plus enumeration.
    pub extract: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterBuild {
    pub cluster: Cluster,
    pub timing: Timing,
}

fn sort_key(s: &str) -> (usize, Vec<&str>) {
    let toks: Vec<&str> = s.split(' ').collect();
    (toks.len(), toks)
}

/// Saturates, extracts, enumerates, and audits one seed. Failures land in
/// the metadata; the seed itself is always kept. The cluster id is left 0.
pub fn build_cluster(seed: &Expr, rules: &[RewriteRule], cfg: &ClusterConfig) -> ClusterBuild {
    let seed_str = seed.to_prefix();
    let mut meta = ClusterMeta {
        rules: cfg.library.clone(),
        saturation_limits: cfg.saturation,
        enumeration_limits: cfg.enumeration,
        saturation: None,
        enumerated: 0,
        enumeration_timed_out: false,
        audit_dropped: 0,
        error: None,
    };
    let mut timing = Timing::default();
    let mut g = EGraph::new();
    let root = match g.add_expr(seed) {
        Ok(id) => id,
        Err(e) => {
            meta.error = Some(e.to_string());
            return ClusterBuild {
                cluster: singleton(seed_str, meta),
                timing,
            };
        }
    };

    let start = Instant::now();
    let report = saturate(&mut g, rules, &cfg.saturation);
    timing.saturate = start.elapsed();
    meta.saturation = Some(report);

    let start = Instant::now();
    let remaining = cfg.saturation.time_budget.saturating_sub(timing.saturate);
    let lim = EnumerationLimits {
        time_budget: cfg.enumeration.time_budget.min(remaining),
        ..cfg.enumeration
    };
    let mut exprs = match extract_grammar(&g, root) {
        Ok(gr) => {
            let en = enumerate_rewrites(&gr, &lim);
            meta.enumeration_timed_out = en.timed_out;
            en.rewrites.iter().map(Expr::to_prefix).collect()
        }
        Err(e) => {
            meta.error = Some(e.to_string());
            Vec::new()
        }
    };
    timing.extract = start.elapsed();
    meta.enumerated = exprs.len();

    if cfg.audit {
        let points = cfg.oracle.reference_points(seed);
        let before = exprs.len();
        exprs.retain(|s| {
            *s == seed_str || Expr::parse(s).is_ok_and(|e| cfg.oracle.compare_at(&points, &e).is_equivalent())
        });
        meta.audit_dropped = before - exprs.len();
    }

    if !exprs.contains(&seed_str) {
        if exprs.len() >= cfg.enumeration.max_rewrites.max(1) {
            exprs.pop();
        }
        exprs.push(seed_str.clone());
        exprs.sort_by(|a, b| sort_key(a).cmp(&sort_key(b)));
    }
    ClusterBuild {
        cluster: Cluster {
            cluster_id: 0,
            seed: seed_str,
            exprs,
            meta,
        },
        timing,
    }
}

fn singleton(seed: String, meta: ClusterMeta) -> Cluster {
    Cluster {
        cluster_id: 0,
        exprs: vec![seed.clone()],
        seed,
        meta,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusBuild {
    pub clusters: Vec<Cluster>,
    pub timings: Vec<Timing>,
    /// Seeds skipped because the oracle finds too few points where they are defined.
    pub degenerate_seeds: Vec<String>,
    /// Seeds skipped because their cluster shares an expression with an
    /// earlier cluster.
    pub overlapping_seeds: Vec<String>,
}

/// Builds clusters for all seeds on `jobs` threads (0: rayon's default),
/// keeping input order. Seeds without a usable domain are skipped, as are
/// clusters sharing an expression with an earlier one, so clusters stay
/// disjoint. Ids are dense in output order.
pub fn build_corpus(seeds: &[Expr], rules: &[RewriteRule], cfg: &ClusterConfig, jobs: usize) -> CorpusBuild {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool");
    let built: Vec<Option<ClusterBuild>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|s| cfg.oracle.has_domain(s).then(|| build_cluster(s, rules, cfg)))
            .collect()
    });

    let mut out = CorpusBuild {
        clusters: Vec::new(),
        timings: Vec::new(),
        degenerate_seeds: Vec::new(),
        overlapping_seeds: Vec::new(),
    };
    let mut seen: HashSet<String> = HashSet::new();
    for (seed, b) in seeds.iter().zip(built) {
        let Some(mut b) = b else {
            out.degenerate_seeds.push(seed.to_prefix());
            continue;
        };
        if b.cluster.exprs.iter().any(|e| seen.contains(e)) {
            out.overlapping_seeds.push(b.cluster.seed);
            continue;
        }
        seen.extend(b.cluster.exprs.iter().cloned());
        b.cluster.cluster_id = out.clusters.len();
        out.clusters.push(b.cluster);
        out.timings.push(b.timing);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub clusters: usize,
    pub expressions: usize,
    pub mean_cluster_size: f64,
    pub min_cluster_size: usize,
    pub max_cluster_size: usize,
    pub enumerated: usize,
    pub audit_dropped: usize,
    /// Operator occurrences over all expressions; `pow e u` counts as `exp`.
    pub operator_histogram: BTreeMap<String, usize>,
    pub distinct_operators: usize,
}

fn count_ops(e: &Expr, hist: &mut BTreeMap<String, usize>) {
    e.visit_preorder(&mut |n| {
        if let Expr::Op(op, kids) = n {
            let name = match (op, kids.first()) {
                (Op::Pow, Some(Expr::Const(Constant::E))) => "exp",
                _ => op.token(),
            };
            *hist.entry(name.to_string()).or_default() += 1;
        }
    });
}

pub fn corpus_stats(clusters: &[Cluster]) -> CorpusStats {
    let sizes: Vec<usize> = clusters.iter().map(|c| c.exprs.len()).collect();
    let expressions: usize = sizes.iter().sum();
    let mut hist = BTreeMap::new();
    for c in clusters {
        for s in &c.exprs {
            if let Ok(e) = Expr::parse(s) {
                count_ops(&e, &mut hist);
            }
        }
    }
    CorpusStats {
        clusters: clusters.len(),
        expressions,
        mean_cluster_size: if clusters.is_empty() {
            0.0
        } else {
            expressions as f64 / clusters.len() as f64
        },
        min_cluster_size: sizes.iter().copied().min().unwrap_or(0),
        max_cluster_size: sizes.iter().copied().max().unwrap_or(0),
        enumerated: clusters.iter().map(|c| c.meta.enumerated).sum(),
        audit_dropped: clusters.iter().map(|c| c.meta.audit_dropped).sum(),
        distinct_operators: hist.len(),
        operator_histogram: hist,
    }
}
