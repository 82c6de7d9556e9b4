use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;

use super::{cosine_with, norm, EmbedError, EmbeddingTable};
use crate::Scalar;

/// Higher similarity first, then ascending expression string.
fn rank<T: Scalar>(a: &(&str, T), b: &(&str, T)) -> Ordering {
    b.1.partial_cmp(&a.1)
        .unwrap_or(Ordering::Equal)
        .then_with(|| a.0.cmp(b.0))
}

fn topk<'a, T: Scalar>(
    table: &'a EmbeddingTable<T>,
    norms: &[T],
    q: &[T],
    exclude: Option<usize>,
    k: usize,
) -> Result<Vec<(&'a str, T)>, EmbedError> {
    let available = table.len() - usize::from(exclude.is_some());
    if k > available {
        return Err(EmbedError::KTooLarge { k, available });
    }
    let nq = norm(q);
    if nq == T::zero() {
        return Err(EmbedError::ZeroVector("query".into()));
    }
    let mut sims: Vec<(&str, T)> = (0..table.len())
        .filter(|&i| Some(i) != exclude)
        .map(|i| (table.names()[i].as_str(), cosine_with(q, nq, table.row(i), norms[i])))
        .collect();
    if k == 0 {
        return Ok(Vec::new());
    }
    if k < sims.len() {
        sims.select_nth_unstable_by(k - 1, rank);
        sims.truncate(k);
    }
    sims.sort_unstable_by(rank);
    Ok(sims)
}

/// The `k` entries most similar to `query`, excluding the query itself.
pub fn retrieve_topk<'a, T: Scalar>(
    table: &'a EmbeddingTable<T>,
    query: &str,
    k: usize,
) -> Result<Vec<(&'a str, T)>, EmbedError> {
    let i = table
        .position(query)
        .ok_or_else(|| EmbedError::MissingEmbedding(query.to_string()))?;
    topk(table, &table.norms()?, table.row(i), Some(i), k)
}

/// Same ranking for a free vector; `exclude` names an entry to leave out.
pub fn retrieve_topk_vector<'a, T: Scalar>(
    table: &'a EmbeddingTable<T>,
    q: &[T],
    exclude: Option<&str>,
    k: usize,
) -> Result<Vec<(&'a str, T)>, EmbedError> {
    if q.len() != table.dim() {
        return Err(EmbedError::LengthMismatch(q.len(), table.dim()));
    }
    topk(table, &table.norms()?, q, exclude.and_then(|e| table.position(e)), k)
}

/// Mean over every clustered expression (as query) of the fraction of its
/// top-`k` that share its cluster. Expressions absent from the table are
/// reported as missing.
pub fn retrieval_accuracy<T: Scalar, G: AsRef<[String]> + Sync>(
    table: &EmbeddingTable<T>,
    truth: &[G],
    k: usize,
) -> Result<f64, EmbedError> {
    let norms = table.norms()?;
    let cluster_of: HashMap<&str, usize> = truth
        .iter()
        .enumerate()
        .flat_map(|(c, g)| g.as_ref().iter().map(move |e| (e.as_str(), c)))
        .collect();
    let queries: Vec<(&str, usize)> = truth
        .iter()
        .enumerate()
        .flat_map(|(c, g)| g.as_ref().iter().map(move |e| (e.as_str(), c)))
        .collect();
    if queries.is_empty() || k == 0 {
        return Ok(0.0);
    }
    let scores = queries
        .par_iter()
        .map(|&(q, c)| {
            let i = table
                .position(q)
                .ok_or_else(|| EmbedError::MissingEmbedding(q.to_string()))?;
            let hits = topk(table, &norms, table.row(i), Some(i), k)?
                .iter()
                .filter(|(e, _)| cluster_of.get(e) == Some(&c))
                .count();
            Ok(hits as f64 / k as f64)
        })
        .collect::<Result<Vec<f64>, EmbedError>>()?;
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::cosine;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table(rows: &[(&str, &[f64])]) -> EmbeddingTable<f64> {
        let mut t = EmbeddingTable::new(rows[0].1.len());
        for (n, v) in rows {
            t.insert(n, v).unwrap();
        }
        t
    }

    #[test]
    fn duplicate_vector_first() {
        let t = table(&[
            ("q", &[1.0, 2.0]),
            ("z", &[2.0, 4.0]),
            ("a", &[2.0, 1.0]),
            ("b", &[-1.0, 0.0]),
        ]);
        let r = retrieve_topk(&t, "q", 3).unwrap();
        assert_eq!(r[0].0, "z");
        assert!((r[0].1 - 1.0).abs() < 1e-15);
        assert_eq!(r.iter().map(|p| p.0).collect::<Vec<_>>(), ["z", "a", "b"]);
        assert_eq!(retrieve_topk(&t, "q", 1).unwrap()[0].0, "z");
        assert!(matches!(
            retrieve_topk(&t, "q", 4),
            Err(EmbedError::KTooLarge { k: 4, available: 3 })
        ));
        assert!(matches!(
            retrieve_topk(&t, "nope", 1),
            Err(EmbedError::MissingEmbedding(_))
        ));
    }

    #[test]
    fn ties_are_lexicographic() {
        let t = table(&[
            ("q", &[1.0, 0.0]),
            ("c", &[0.0, 1.0]),
            ("b", &[0.0, -1.0]),
            ("a", &[0.0, 2.0]),
        ]);
        let names: Vec<&str> = retrieve_topk(&t, "q", 3).unwrap().iter().map(|p| p.0).collect();
        assert_eq!(names, ["a", "b", "c"]);
    }

    #[test]
    fn free_vector_query() {
        let t = table(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let r = retrieve_topk_vector(&t, &[0.1, 1.0], None, 2).unwrap();
        assert_eq!(r[0].0, "b");
        let r = retrieve_topk_vector(&t, &[0.1, 1.0], Some("b"), 1).unwrap();
        assert_eq!(r[0].0, "a");
        assert!(retrieve_topk_vector(&t, &[1.0], None, 1).is_err());
    }

    #[test]
    fn retrieval_on_separated_clusters() {
        let t = table(&[
            ("a1", &[1.0, 0.0, 0.01]),
            ("a2", &[1.0, 0.02, 0.0]),
            ("a3", &[0.99, 0.0, 0.0]),
            ("b1", &[0.0, 1.0, 0.0]),
            ("b2", &[0.01, 1.0, 0.0]),
            ("b3", &[0.0, 1.0, 0.03]),
        ]);
        let truth = vec![
            vec!["a1".to_string(), "a2".into(), "a3".into()],
            vec!["b1".into(), "b2".into(), "b3".into()],
        ];
        assert_eq!(retrieval_accuracy(&t, &truth, 2).unwrap(), 1.0);
        assert!((retrieval_accuracy(&t, &truth, 5).unwrap() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn random_embeddings_hit_base_rate() {
        let (clusters, size, k) = (10, 20, 5);
        let base = (size - 1) as f64 / (clusters * size - 1) as f64;
        for seed in 0..5 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut t = EmbeddingTable::<f64>::new(16);
            let mut truth = vec![Vec::new(); clusters];
            for (c, group) in truth.iter_mut().enumerate() {
                for m in 0..size {
                    let name = format!("c{c}m{m}");
                    let v: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
                    t.insert(&name, &v).unwrap();
                    group.push(name);
                }
            }
            let acc = retrieval_accuracy(&t, &truth, k).unwrap();
            assert!((acc - base).abs() <= 0.05, "seed {seed}: {acc} vs {base}");
        }
    }

    fn brute_force(t: &EmbeddingTable<f64>, q: &str) -> Vec<(String, f64)> {
        let qv = t.get(q).unwrap();
        let mut all: Vec<(String, f64)> = t
            .iter()
            .filter(|(n, _)| *n != q)
            .map(|(n, v)| (n.to_string(), cosine(qv, v).unwrap()))
            .collect();
        all.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        all
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn topk_is_prefix_of_full_sort(seed in any::<u64>(), k in 1usize..99) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut t = EmbeddingTable::<f64>::new(8);
            for i in 0..100 {
                // Coarse grid so ties actually occur.
                let v: Vec<f64> = (0..8).map(|_| rng.random_range(-2i32..=2) as f64).collect();
                let v = if v.iter().all(|x| *x == 0.0) { vec![1.0; 8] } else { v };
                t.insert(&format!("e{i:03}"), &v).unwrap();
            }
            let q = format!("e{:03}", rng.random_range(0..100));
            let full = brute_force(&t, &q);
            let got = retrieve_topk(&t, &q, k).unwrap();
            prop_assert_eq!(got.len(), k);
            for (g, f) in got.iter().zip(&full) {
                prop_assert_eq!(g.0, f.0.as_str());
                prop_assert_eq!(g.1, f.1);
            }
            let next = retrieve_topk(&t, &q, k + 1).unwrap();
            prop_assert_eq!(&next[..k], &got[..]);
        }
    }
}
