//! Evaluation of externally supplied expression embeddings: k-means
//! clustering accuracy, top-k retrieval, threshold mistake detection and
//! embedding algebra.
//!
//! Everything is generic over the component type; [`crate::EmbeddingTable64`]
//! and [`crate::EmbeddingTable32`] are the usual instantiations.

mod algebra;
mod kmeans;
mod mistakes;
mod retrieve;
mod synth;

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::Scalar;

pub use algebra::{algebra_accuracy, embedding_algebra, AlgebraTest};
pub use kmeans::{clustering_accuracy, clustering_accuracy_weighted, kmeans, Labels, DEFAULT_MAX_ITERS};
pub use mistakes::{
    compute_threshold, detect_mistakes, ClassScores, MistakeReport, MistakeScorer, MistakeThreshold, ThresholdReport,
};
pub use retrieve::{retrieval_accuracy, retrieve_topk, retrieve_topk_vector};
pub use synth::{derivation_oracle_embeddings, oracle_algebra_tests, synthetic_oracle_embeddings};

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected {expected} components, found {found}")]
    DimensionMismatch { line: usize, expected: usize, found: usize },
    #[error("line {line}: {msg}")]
    MalformedLine { line: usize, msg: String },
    #[error("line {line}: non-finite component")]
    NonFiniteComponent { line: usize },
    #[error("line {line}: duplicate expression `{expr}`")]
    DuplicateExpression { line: usize, expr: String },
    #[error("vectors have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("zero vector for `{0}`")]
    ZeroVector(String),
    #[error("k = {k} but only {available} candidates")]
    KTooLarge { k: usize, available: usize },
    #[error("no embedding for `{0}`")]
    MissingEmbedding(String),
    #[error("all {0} derivations lack a correct transition")]
    AllDerivationsSkipped(usize),
    #[error("no candidates left after exclusions")]
    EmptyCandidatePool,
    #[error("dimension {dim} is too small for {needed} orthogonal centroids")]
    DimensionTooSmall { dim: usize, needed: usize },
}

/// Expression string to fixed-length vector, in insertion order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T> {
    dim: usize,
    names: Vec<String>,
    data: Vec<T>,
    index: HashMap<String, usize>,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn new(dim: usize) -> Self {
        EmbeddingTable {
            dim,
            names: Vec::new(),
            data: Vec::new(),
            index: HashMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&[T]> {
        self.index.get(name).map(|&i| self.row(i))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = (&str, &[T])> {
        self.names.iter().enumerate().map(|(i, n)| (n.as_str(), self.row(i)))
    }

    pub(crate) fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn position(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub(crate) fn lookup(&self, name: &str) -> Result<&[T], EmbedError> {
        self.get(name)
            .ok_or_else(|| EmbedError::MissingEmbedding(name.to_string()))
    }

    /// Adds a row. `line` is only used in error reports.
    fn push(&mut self, name: &str, v: &[T], line: usize) -> Result<(), EmbedError> {
        if v.len() != self.dim {
            return Err(EmbedError::DimensionMismatch {
                line,
                expected: self.dim,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(EmbedError::NonFiniteComponent { line });
        }
        if self.index.contains_key(name) {
            return Err(EmbedError::DuplicateExpression {
                line,
                expr: name.to_string(),
            });
        }
        self.index.insert(name.to_string(), self.names.len());
        self.names.push(name.to_string());
        self.data.extend_from_slice(v);
        Ok(())
    }

    pub fn insert(&mut self, name: &str, v: &[T]) -> Result<(), EmbedError> {
        let line = self.len() + 1;
        self.push(name, v, line)
    }

    /// Applies `f` to every vector. The output dimension is taken from the first row.
    pub fn map_vectors(&self, mut f: impl FnMut(&[T]) -> Vec<T>) -> Result<Self, EmbedError> {
        let rows: Vec<Vec<T>> = (0..self.len()).map(|i| f(self.row(i))).collect();
        let mut out = EmbeddingTable::new(rows.first().map_or(self.dim, Vec::len));
        for (name, v) in self.names.iter().zip(&rows) {
            out.insert(name, v)?;
        }
        Ok(out)
    }

    /// Parses `expr<TAB>v1,v2,...` lines. The dimension comes from the first row.
    pub fn parse_tsv(text: &str) -> Result<Self, EmbedError> {
        let mut table: Option<Self> = None;
        let mut buf = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let raw = raw.strip_suffix('\r').unwrap_or(raw);
            if raw.trim().is_empty() {
                continue;
            }
            let (name, nums) = raw.split_once('\t').ok_or_else(|| EmbedError::MalformedLine {
                line,
                msg: "missing tab separator".into(),
            })?;
            if name.is_empty() {
                return Err(EmbedError::MalformedLine {
                    line,
                    msg: "empty expression".into(),
                });
            }
            buf.clear();
            for tok in nums.split(',') {
                let v = tok.trim().parse::<T>().map_err(|_| EmbedError::MalformedLine {
                    line,
                    msg: format!("bad number `{tok}`"),
                })?;
                buf.push(v);
            }
            table
                .get_or_insert_with(|| EmbeddingTable::new(buf.len()))
                .push(name, &buf, line)?;
        }
        Ok(table.unwrap_or_else(|| EmbeddingTable::new(0)))
    }

    /// Shortest round-tripping decimals, so a reload is bit-exact.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (name, v) in self.iter() {
            out.push_str(name);
            out.push('\t');
            for (j, x) in v.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                write!(out, "{x}").expect("write to String");
            }
            out.push('\n');
        }
        out
    }

    pub fn load(path: &Path) -> Result<Self, EmbedError> {
        let text = std::fs::read_to_string(path).map_err(|source| EmbedError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse_tsv(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), EmbedError> {
        let io = |source| EmbedError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        std::fs::write(path, self.to_tsv()).map_err(io)
    }

    /// Euclidean norm of every row; errors on a zero row.
    pub(crate) fn norms(&self) -> Result<Vec<T>, EmbedError> {
        (0..self.len())
            .map(|i| {
                let n = norm(self.row(i));
                if n > T::zero() {
                    Ok(n)
                } else {
                    Err(EmbedError::ZeroVector(self.names[i].clone()))
                }
            })
            .collect()
    }
}

pub(crate) fn dot<T: Scalar>(u: &[T], v: &[T]) -> T {
    u.iter().zip(v).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
}

pub(crate) fn norm<T: Scalar>(u: &[T]) -> T {
    dot(u, u).sqrt()
}

fn clamp_unit<T: Scalar>(c: T) -> T {
    c.max(-T::one()).min(T::one())
}

/// Cosine with precomputed norms.
pub(crate) fn cosine_with<T: Scalar>(u: &[T], nu: T, v: &[T], nv: T) -> T {
    clamp_unit(dot(u, v) / (nu * nv))
}

/// `u·v / (|u| |v|)`, clamped to `[-1, 1]`.
pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> Result<T, EmbedError> {
    if u.len() != v.len() {
        return Err(EmbedError::LengthMismatch(u.len(), v.len()));
    }
    let (nu, nv) = (norm(u), norm(v));
    if nu == T::zero() || nv == T::zero() {
        return Err(EmbedError::ZeroVector(
            if nu == T::zero() { "left" } else { "right" }.into(),
        ));
    }
    Ok(cosine_with(u, nu, v, nv))
}

/// Cosine between two table entries.
pub fn similarity<T: Scalar>(table: &EmbeddingTable<T>, a: &str, b: &str) -> Result<T, EmbedError> {
    let (u, v) = (table.lookup(a)?, table.lookup(b)?);
    cosine(u, v).map_err(|e| match e {
        EmbedError::ZeroVector(side) => EmbedError::ZeroVector(if side == "left" { a } else { b }.to_string()),
        e => e,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_lines_three_dims() {
        let t = EmbeddingTable::<f64>::parse_tsv("x\t1,2,3\n+ x 1\t0.5,-1,2e-3\n").unwrap();
        assert_eq!((t.len(), t.dim()), (2, 3));
        assert_eq!(t.get("+ x 1").unwrap(), [0.5, -1.0, 0.002]);
    }

    #[test]
    fn dimension_mismatch_reports_line() {
        let err = EmbeddingTable::<f64>::parse_tsv("a\t1,2,3\n\nb\t1,2\n").unwrap_err();
        assert!(
            matches!(
                err,
                EmbedError::DimensionMismatch {
                    line: 3,
                    expected: 3,
                    found: 2
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn malformed_and_non_finite() {
        for (text, want_line) in [("a 1,2\n", 1), ("a\t1,x\n", 1), ("a\t1\n\t2\n", 2)] {
            match EmbeddingTable::<f64>::parse_tsv(text) {
                Err(EmbedError::MalformedLine { line, .. }) => assert_eq!(line, want_line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
        assert!(matches!(
            EmbeddingTable::<f64>::parse_tsv("a\t1,NaN\n"),
            Err(EmbedError::NonFiniteComponent { line: 1 })
        ));
        assert!(matches!(
            EmbeddingTable::<f32>::parse_tsv("a\t1,inf\n"),
            Err(EmbedError::NonFiniteComponent { line: 1 })
        ));
        assert!(matches!(
            EmbeddingTable::<f64>::parse_tsv("a\t1\na\t2\n"),
            Err(EmbedError::DuplicateExpression { line: 2, .. })
        ));
    }

    #[test]
    fn cosine_basics() {
        assert_eq!(cosine(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        assert!(matches!(
            cosine(&[0.0, 0.0], &[1.0, 0.0]),
            Err(EmbedError::ZeroVector(_))
        ));
        assert!(matches!(
            cosine(&[1.0], &[1.0, 0.0]),
            Err(EmbedError::LengthMismatch(1, 2))
        ));
        let t = EmbeddingTable::<f64>::parse_tsv("a\t0,0\nb\t1,1\n").unwrap();
        assert!(matches!(similarity(&t, "b", "a"), Err(EmbedError::ZeroVector(s)) if s == "a"));
        assert!(matches!(similarity(&t, "b", "c"), Err(EmbedError::MissingEmbedding(_))));
    }

    /// Normalise first, then a reversed-order sum of products.
    fn cosine_dual(u: &[f64], v: &[f64]) -> f64 {
        let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
        let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        u.iter().zip(v).rev().map(|(a, b)| (a / nu) * (b / nv)).sum()
    }

    proptest! {
        #[test]
        fn cosine_matches_dual(
            pair in (1usize..48).prop_flat_map(|d| (
                prop::collection::vec(-10.0f64..10.0, d),
                prop::collection::vec(-10.0f64..10.0, d),
            ))
        ) {
            let (u, v) = pair;
            prop_assume!(norm(&u) > 1e-3 && norm(&v) > 1e-3);
            let c = cosine(&u, &v).unwrap();
            prop_assert!((c - cosine_dual(&u, &v)).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&c));
        }

        #[test]
        fn tsv_round_trip_is_bit_exact(rows in prop::collection::vec(prop::collection::vec(any::<f64>(), 4), 1..20)) {
            let mut t = EmbeddingTable::<f64>::new(4);
            for (i, r) in rows.iter().enumerate() {
                let r: Vec<f64> = r.iter().map(|x| if x.is_finite() { *x } else { 0.5 }).collect();
                t.insert(&format!("e{i}"), &r).unwrap();
            }
            let back = EmbeddingTable::<f64>::parse_tsv(&t.to_tsv()).unwrap();
            prop_assert_eq!(back.names(), t.names());
            for (a, b) in t.iter().zip(back.iter()) {
                let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
                prop_assert_eq!(bits(a.1), bits(b.1));
            }
        }

        #[test]
        fn f32_round_trip_is_bit_exact(v in prop::collection::vec(-1e30f32..1e30, 8)) {
            let mut t = EmbeddingTable::<f32>::new(8);
            t.insert("x", &v).unwrap();
            let back = EmbeddingTable::<f32>::parse_tsv(&t.to_tsv()).unwrap();
            prop_assert_eq!(back, t);
        }
    }

    #[test]
    fn save_load() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e/emb.tsv");
        let mut t = EmbeddingTable::<f64>::new(2);
        t.insert("sin x", &[0.1, -0.0]).unwrap();
        t.insert("cos x", &[1.0 / 3.0, 2.5e-300]).unwrap();
        t.save(&p).unwrap();
        let back = EmbeddingTable::<f64>::load(&p).unwrap();
        assert_eq!(back.get("sin x").unwrap()[1].to_bits(), (-0.0f64).to_bits());
        assert_eq!(back, t);
        assert!(matches!(
            EmbeddingTable::<f64>::load(&dir.path().join("missing")),
            Err(EmbedError::Io { .. })
        ));
    }
}
