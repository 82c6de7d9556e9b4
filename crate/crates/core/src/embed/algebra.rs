use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use super::{cosine_with, norm, EmbedError, EmbeddingTable};
use crate::Scalar;

/// `x1 : y1 :: x2 : ?`, with `y_gt` the expected answer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlgebraTest {
    pub x1: String,
    pub y1: String,
    pub x2: String,
    pub y_gt: String,
    /// Expressions equivalent to `x2` or `y_gt`, other than `y_gt`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exclude: Vec<String>,
}

impl AlgebraTest {
    /// Fills `exclude` from cluster membership: everything sharing a cluster
    /// with `x2` or `y_gt`.
    pub fn with_exclusions<G: AsRef<[String]>>(mut self, clusters: &[G]) -> Self {
        let mut ex: Vec<String> = clusters
            .iter()
            .map(AsRef::as_ref)
            .filter(|g| g.contains(&self.x2) || g.contains(&self.y_gt))
            .flatten()
            .filter(|e| **e != self.y_gt)
            .cloned()
            .collect();
        ex.sort();
        ex.dedup();
        self.exclude = ex;
        self
    }
}

/// The candidate closest in cosine to `-v(x1) + v(y1) + v(x2)`, leaving out
/// `x1`, `y1`, `x2` and the exclusion set. Ties go to the smaller string.
pub fn embedding_algebra<'a, T: Scalar>(
    test: &AlgebraTest,
    table: &'a EmbeddingTable<T>,
) -> Result<&'a str, EmbedError> {
    let (x1, y1, x2) = (
        table.lookup(&test.x1)?,
        table.lookup(&test.y1)?,
        table.lookup(&test.x2)?,
    );
    let target: Vec<T> = (0..table.dim()).map(|j| -x1[j] + y1[j] + x2[j]).collect();
    let nt = norm(&target);
    if nt == T::zero() {
        return Err(EmbedError::ZeroVector("algebra target".into()));
    }
    let mut skip: HashSet<&str> = test.exclude.iter().map(String::as_str).collect();
    skip.extend([test.x1.as_str(), test.y1.as_str(), test.x2.as_str()]);
    let norms = table.norms()?;
    let mut best: Option<(&str, T)> = None;
    for (i, name) in table.names().iter().enumerate() {
        if skip.contains(name.as_str()) {
            continue;
        }
        let s = cosine_with(&target, nt, table.row(i), norms[i]);
        let better = match best {
            None => true,
            Some((b, bs)) => s > bs || (s == bs && name.as_str() < b),
        };
        if better {
            best = Some((name, s));
        }
    }
    best.map(|(n, _)| n).ok_or(EmbedError::EmptyCandidatePool)
}

/// Fraction of tests whose prediction is `y_gt`.
pub fn algebra_accuracy<T: Scalar>(tests: &[AlgebraTest], table: &EmbeddingTable<T>) -> Result<f64, EmbedError> {
    if tests.is_empty() {
        return Ok(0.0);
    }
    let mut hits = 0;
    for t in tests {
        if embedding_algebra(t, table)? == t.y_gt {
            hits += 1;
        }
    }
    Ok(hits as f64 / tests.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn test(x1: &str, y1: &str, x2: &str, y_gt: &str) -> AlgebraTest {
        AlgebraTest {
            x1: x1.into(),
            y1: y1.into(),
            x2: x2.into(),
            y_gt: y_gt.into(),
            exclude: Vec::new(),
        }
    }

    fn table(rows: &[(&str, &[f64])]) -> EmbeddingTable<f64> {
        let mut t = EmbeddingTable::new(rows[0].1.len());
        for (n, v) in rows {
            t.insert(n, v).unwrap();
        }
        t
    }

    #[test]
    fn sin_cos_analogy() {
        let t = table(&[
            ("sin x", &[1.0, 0.0, 0.0]),
            ("- 0 sin - 0 x", &[0.99, 0.05, 0.0]),
            ("cos x", &[0.0, 1.0, 0.0]),
            ("cos - 0 x", &[0.02, 0.98, 0.0]),
            ("* 1 cos x", &[0.0, 0.99, 0.03]),
            ("ln x", &[0.0, 0.0, 1.0]),
        ]);
        let clusters = vec![
            vec!["sin x".to_string(), "- 0 sin - 0 x".into()],
            vec!["cos x".to_string(), "cos - 0 x".into(), "* 1 cos x".into()],
            vec!["ln x".to_string()],
        ];
        let raw = test("sin x", "- 0 sin - 0 x", "cos x", "cos - 0 x");
        let t_ex = raw.clone().with_exclusions(&clusters);
        assert_eq!(t_ex.exclude, ["* 1 cos x", "cos x"]);
        assert_eq!(embedding_algebra(&t_ex, &t).unwrap(), "cos - 0 x");
        assert_eq!(algebra_accuracy(&[t_ex], &t).unwrap(), 1.0);
        let json = serde_json::to_string(&raw).unwrap();
        assert_eq!(
            json,
            r#"{"x1":"sin x","y1":"- 0 sin - 0 x","x2":"cos x","y_gt":"cos - 0 x"}"#
        );
        assert_eq!(serde_json::from_str::<AlgebraTest>(&json).unwrap(), raw);
    }

    #[test]
    fn x1_equal_x2_reduces_to_nearest_y1() {
        let t = table(&[
            ("a", &[1.0, 0.0]),
            ("b", &[0.0, 1.0]),
            ("b'", &[0.1, 1.0]),
            ("c", &[0.7, 0.7]),
        ]);
        assert_eq!(embedding_algebra(&test("a", "b", "a", "b'"), &t).unwrap(), "b'");
    }

    #[test]
    fn errors() {
        let t = table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        assert!(matches!(
            embedding_algebra(&test("a", "b", "a", "b"), &t),
            Err(EmbedError::EmptyCandidatePool)
        ));
        assert!(matches!(
            embedding_algebra(&test("a", "q", "a", "b"), &t),
            Err(EmbedError::MissingEmbedding(_))
        ));
    }

    #[test]
    fn ties_lexicographic() {
        let t = table(&[
            ("x", &[1.0, 0.0]),
            ("z", &[0.0, 1.0]),
            ("b", &[0.0, 2.0]),
            ("a", &[0.0, 1.0]),
        ]);
        assert_eq!(embedding_algebra(&test("x", "z", "x", "?"), &t).unwrap(), "a");
    }

    fn random_table(seed: u64) -> EmbeddingTable<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = EmbeddingTable::new(5);
        for i in 0..30 {
            let v: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
            t.insert(&format!("e{i}"), &v).unwrap();
        }
        t
    }

    /// Random orthogonal matrix by Gram-Schmidt.
    fn orthogonal(seed: u64, d: usize) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q: Vec<Vec<f64>> = Vec::new();
        while q.len() < d {
            let mut v: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            for u in &q {
                let p: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(u).for_each(|(a, b)| *a -= p * b);
            }
            let n = norm(&v);
            if n > 1e-6 {
                q.push(v.iter().map(|a| a / n).collect());
            }
        }
        q
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]
        #[test]
        fn invariant_under_scaling_and_rotation(seed in any::<u64>(), scale in 0.01f64..100.0) {
            let t = random_table(seed);
            let q = test("e0", "e1", "e2", "e3");
            let base = embedding_algebra(&q, &t).unwrap().to_string();
            let scaled = t.map_vectors(|v| v.iter().map(|x| x * scale).collect()).unwrap();
            prop_assert_eq!(embedding_algebra(&q, &scaled).unwrap(), base.as_str());
            let m = orthogonal(seed ^ 0x5a5a, 5);
            let rotated = t
                .map_vectors(|v| m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect())
                .unwrap();
            prop_assert_eq!(embedding_algebra(&q, &rotated).unwrap(), base.as_str());
        }
    }
}
