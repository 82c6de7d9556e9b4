//! Corpus factory: seeds to clusters of equivalent expressions, and the
//! datasets built from them.

mod cluster;
pub(crate) mod dataset;
mod derive;
pub mod io;
mod select;
pub mod template;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::egraph::{SaturationLimits, SaturationReport};
use crate::grammar::EnumerationLimits;

pub use cluster::{
    build_cluster, build_corpus, corpus_stats, ClusterBuild, ClusterConfig, CorpusBuild, CorpusStats, Timing,
};
pub use dataset::{make_pairs, make_triplets, split_train_test};
pub use derive::{generate_derivations, Derivation, DerivationConfig};
pub use select::{make_selection_tests, SelectionTest, CANDIDATES};
pub use template::{instantiate_templates, parse_templates, Template, TemplateError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub cluster_id: usize,
    pub seed: String,
    /// Prefix strings, shortest first then lexicographic; includes the seed.
    pub exprs: Vec<String>,
    pub meta: ClusterMeta,
}

impl AsRef<[String]> for Cluster {
    fn as_ref(&self) -> &[String] {
        &self.exprs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMeta {
    pub rules: String,
    pub saturation_limits: SaturationLimits,
    pub enumeration_limits: EnumerationLimits,
    pub saturation: Option<SaturationReport>,
    /// Rewrites produced by enumeration, before the audit.
    pub enumerated: usize,
    pub enumeration_timed_out: bool,
    /// Rewrites the oracle audit rejected.
    pub audit_dropped: usize,
    pub error: Option<String>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("need at least two clusters, found {0}")]
    InsufficientClusters(usize),
    #[error("no cluster has two distinct members")]
    ClusterTooSmall,
    #[error("test fraction must lie strictly between 0 and 1, got {0}")]
    InvalidFraction(f64),
    #[error("rule list is empty")]
    NoRules,
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}:{line}: {msg}")]
    Format { path: String, line: usize, msg: String },
}
