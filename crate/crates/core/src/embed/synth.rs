//! Embeddings that encode the ground truth directly: every equivalence class
//! gets its own basis direction plus a little noise. Useful for checking the
//! evaluation pipeline without a trained encoder.

use std::collections::{BTreeSet, HashMap};

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{AlgebraTest, EmbedError, EmbeddingTable};
use crate::corpus::Derivation;
use crate::Scalar;

fn noisy_basis<T: Scalar>(axis: usize, dim: usize, noise: &Normal<f64>, rng: &mut ChaCha8Rng) -> Vec<T> {
    let mut v: Vec<f64> = (0..dim)
        .map(|j| f64::from(u8::from(j == axis)) + noise.sample(rng))
        .collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    v.into_iter().map(T::lit).collect()
}

fn normal(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma.abs()).expect("finite sigma")
}

/// Cluster `c` is centred on basis vector `e_c`; each member is the centre
/// plus `N(0, sigma^2)` per component, renormalised. An expression listed in
/// more than one cluster keeps its first vector.
pub fn synthetic_oracle_embeddings<T: Scalar, G: AsRef<[String]>>(
    clusters: &[G],
    dim: usize,
    sigma: f64,
    seed: u64,
) -> Result<EmbeddingTable<T>, EmbedError> {
    if dim < clusters.len() {
        return Err(EmbedError::DimensionTooSmall {
            dim,
            needed: clusters.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = normal(sigma);
    let mut table = EmbeddingTable::new(dim);
    for (c, members) in clusters.iter().enumerate() {
        for e in members.as_ref() {
            let v = noisy_basis(c, dim, &noise, &mut rng);
            if !table.contains(e) {
                table.insert(e, &v)?;
            }
        }
    }
    Ok(table)
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Embeddings for derivation steps. Steps joined by correct transitions
/// share a class; classes are coloured greedily so that the two ends of
/// every mistake get different basis directions.
pub fn derivation_oracle_embeddings<T: Scalar>(
    derivations: &[Derivation],
    dim: usize,
    sigma: f64,
    seed: u64,
) -> Result<EmbeddingTable<T>, EmbedError> {
    let mut ids: HashMap<&str, usize> = HashMap::new();
    let mut names: Vec<&str> = Vec::new();
    for d in derivations {
        for s in &d.steps {
            ids.entry(s.as_str()).or_insert_with(|| {
                names.push(s);
                names.len() - 1
            });
        }
    }
    let mut parent: Vec<usize> = (0..names.len()).collect();
    let mut wrong = Vec::new();
    for d in derivations {
        for (k, w) in d.steps.windows(2).enumerate() {
            let (a, b) = (ids[w[0].as_str()], ids[w[1].as_str()]);
            if d.mistakes.contains(&(k + 1)) {
                wrong.push((a, b));
            } else {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut conflicts: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    for (a, b) in wrong {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        conflicts.entry(ra).or_default().insert(rb);
        conflicts.entry(rb).or_default().insert(ra);
    }
    let mut colour: HashMap<usize, usize> = HashMap::new();
    for i in 0..names.len() {
        let r = find(&mut parent, i);
        if colour.contains_key(&r) {
            continue;
        }
        let used: BTreeSet<usize> = conflicts
            .get(&r)
            .into_iter()
            .flatten()
            .filter_map(|n| colour.get(n).copied())
            .collect();
        let c = (0..).find(|c| !used.contains(c)).expect("unbounded");
        if c >= dim {
            return Err(EmbedError::DimensionTooSmall { dim, needed: c + 1 });
        }
        colour.insert(r, c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = normal(sigma);
    let mut table = EmbeddingTable::new(dim);
    for (i, name) in names.iter().enumerate() {
        let c = colour[&find(&mut parent, i)];
        table.insert(name, &noisy_basis(c, dim, &noise, &mut rng))?;
    }
    Ok(table)
}

/// Analogies whose answer follows from cluster structure alone: `x1` and
/// `y1` are distinct members of one cluster, `x2` and `y_gt` of another.
/// Exclusions are filled in from `clusters`.
pub fn oracle_algebra_tests<G: AsRef<[String]>>(clusters: &[G], count: usize, seed: u64) -> Vec<AlgebraTest> {
    let eligible: Vec<&[String]> = clusters.iter().map(AsRef::as_ref).filter(|g| g.len() >= 2).collect();
    if eligible.len() < 2 {
        return Vec::new();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let pair: Vec<&&[String]> = eligible.choose_multiple(&mut rng, 2).collect();
            let a: Vec<&String> = pair[0].choose_multiple(&mut rng, 2).collect();
            let b: Vec<&String> = pair[1].choose_multiple(&mut rng, 2).collect();
            AlgebraTest {
                x1: a[0].clone(),
                y1: a[1].clone(),
                x2: b[0].clone(),
                y_gt: b[1].clone(),
                exclude: Vec::new(),
            }
            .with_exclusions(clusters)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::{algebra_accuracy, clustering_accuracy, kmeans, similarity, DEFAULT_MAX_ITERS};

    fn clusters(n: usize, size: usize) -> Vec<Vec<String>> {
        (0..n)
            .map(|c| (0..size).map(|m| format!("c{c}m{m}")).collect())
            .collect()
    }

    #[test]
    fn zero_noise_gives_identical_members() {
        let cs = clusters(3, 4);
        let t = synthetic_oracle_embeddings::<f64, _>(&cs, 5, 0.0, 1).unwrap();
        assert_eq!(t.len(), 12);
        assert_eq!(t.get("c1m0").unwrap(), t.get("c1m3").unwrap());
        assert_eq!(t.get("c2m1").unwrap(), [0.0, 0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn intra_near_one_inter_near_zero() {
        let cs = clusters(20, 10);
        let t = synthetic_oracle_embeddings::<f64, _>(&cs, 32, 0.01, 7).unwrap();
        for (i, a) in cs.iter().enumerate() {
            for (j, b) in cs.iter().enumerate() {
                let s = similarity(&t, &a[0], &b[1]).unwrap();
                if i == j {
                    assert!(s > 0.99, "{s}");
                } else {
                    assert!(s.abs() < 0.1, "{s}");
                }
            }
        }
    }

    #[test]
    fn kmeans_recovers_partition() {
        let cs = clusters(20, 10);
        let t = synthetic_oracle_embeddings::<f64, _>(&cs, 32, 0.01, 3).unwrap();
        let labels = kmeans(&t, 20, 3, DEFAULT_MAX_ITERS).unwrap();
        assert!(clustering_accuracy(&labels, &cs) >= 0.99);
    }

    #[test]
    fn too_many_clusters() {
        assert!(matches!(
            synthetic_oracle_embeddings::<f32, _>(&clusters(4, 2), 3, 0.01, 0),
            Err(EmbedError::DimensionTooSmall { dim: 3, needed: 4 })
        ));
    }

    #[test]
    fn deterministic() {
        let cs = clusters(3, 3);
        assert_eq!(
            synthetic_oracle_embeddings::<f64, _>(&cs, 4, 0.1, 5).unwrap(),
            synthetic_oracle_embeddings::<f64, _>(&cs, 4, 0.1, 5).unwrap()
        );
    }

    #[test]
    fn derivation_mistakes_change_direction() {
        let d = |id, steps: &[&str], mistakes: &[usize]| Derivation {
            id,
            steps: steps.iter().map(|s| s.to_string()).collect(),
            mistakes: mistakes.to_vec(),
        };
        let ds = [d(0, &["a", "b", "c", "d"], &[2]), d(1, &["b", "e", "f"], &[1])];
        let t = derivation_oracle_embeddings::<f64>(&ds, 4, 0.0, 0).unwrap();
        assert_eq!(similarity(&t, "a", "b").unwrap(), 1.0);
        assert_eq!(similarity(&t, "c", "d").unwrap(), 1.0);
        assert_eq!(similarity(&t, "b", "c").unwrap(), 0.0);
        assert_eq!(similarity(&t, "b", "e").unwrap(), 0.0);
        assert_eq!(similarity(&t, "e", "f").unwrap(), 1.0);
    }

    #[test]
    fn algebra_suite_is_perfect() {
        let cs = clusters(20, 10);
        let t = synthetic_oracle_embeddings::<f64, _>(&cs, 32, 0.01, 11).unwrap();
        let tests = oracle_algebra_tests(&cs, 20, 4);
        assert_eq!(tests.len(), 20);
        for q in &tests {
            assert_eq!(q.exclude.len(), 9);
            assert!(!q.exclude.contains(&q.y_gt));
        }
        assert_eq!(algebra_accuracy(&tests, &t).unwrap(), 1.0);
    }
}
