use std::collections::{BTreeMap, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EmbedError, EmbeddingTable};
use crate::Scalar;

pub const DEFAULT_MAX_ITERS: usize = 300;

/// Expression to cluster label.
pub type Labels = BTreeMap<String, usize>;

fn dist2<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
}

/// Index of the nearest centre; ties go to the lower index.
fn nearest<T: Scalar>(p: &[T], centres: &[Vec<T>]) -> (usize, T) {
    let mut best = (0, dist2(p, &centres[0]));
    for (j, c) in centres.iter().enumerate().skip(1) {
        let d = dist2(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn plus_plus<T: Scalar, R: Rng>(table: &EmbeddingTable<T>, k: usize, rng: &mut R) -> Vec<Vec<T>> {
    let n = table.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centres = vec![table.row(first).to_vec()];
    let mut d2: Vec<f64> = (0..n)
        .map(|i| dist2(table.row(i), &centres[0]).to_f64().unwrap_or(0.0))
        .collect();
    while centres.len() < k {
        let pick = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // Every remaining point coincides with a centre.
            Err(_) => {
                let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
                free[rng.random_range(0..free.len())]
            }
        };
        chosen[pick] = true;
        let c = table.row(pick).to_vec();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(dist2(table.row(i), &c).to_f64().unwrap_or(0.0));
        }
        centres.push(c);
    }
    centres
}

/// Lloyd iterations from a k-means++ start. Stops when no assignment changes
/// or after `max_iters`. An emptied cluster is re-seeded with the point
/// farthest from its current centre.
pub fn kmeans<T: Scalar>(
    table: &EmbeddingTable<T>,
    k: usize,
    seed: u64,
    max_iters: usize,
) -> Result<Labels, EmbedError> {
    let n = table.len();
    if k == 0 || k > n {
        return Err(EmbedError::KTooLarge { k, available: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centres = plus_plus(table, k, &mut rng);
    let mut assign = vec![usize::MAX; n];
    for _ in 0..max_iters.max(1) {
        let mut changed = false;
        let mut dists = vec![T::zero(); n];
        for i in 0..n {
            let (j, d) = nearest(table.row(i), &centres);
            dists[i] = d;
            if assign[i] != j {
                assign[i] = j;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut sums = vec![vec![T::zero(); table.dim()]; k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            counts[assign[i]] += 1;
            for (s, &x) in sums[assign[i]].iter_mut().zip(table.row(i)) {
                *s = *s + x;
            }
        }
        for j in 0..k {
            if counts[j] == 0 {
                let far = (0..n)
                    .max_by(|&a, &b| dists[a].partial_cmp(&dists[b]).unwrap().then(b.cmp(&a)))
                    .expect("nonempty");
                dists[far] = T::zero();
                centres[j] = table.row(far).to_vec();
            } else {
                let c = T::from_usize(counts[j]).expect("count fits");
                centres[j] = sums[j].iter().map(|&s| s / c).collect();
            }
        }
    }
    Ok(table.names().iter().cloned().zip(assign).collect())
}

/// Per ground-truth cluster: members, and how many the mapped prediction gets right.
fn tally<G: AsRef<[String]>>(predicted: &Labels, truth: &[G]) -> Vec<(usize, usize)> {
    let mut votes: HashMap<usize, BTreeMap<usize, usize>> = HashMap::new();
    for (ci, members) in truth.iter().enumerate() {
        for e in members.as_ref() {
            if let Some(&l) = predicted.get(e) {
                *votes.entry(l).or_default().entry(ci).or_default() += 1;
            }
        }
    }
    // Majority vote; ties go to the lower ground-truth index.
    let mapping: HashMap<usize, usize> = votes
        .into_iter()
        .map(|(l, v)| {
            let best = v.iter().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0))).map(|(&c, _)| c);
            (l, best.expect("label has votes"))
        })
        .collect();
    truth
        .iter()
        .enumerate()
        .map(|(ci, members)| {
            let members = members.as_ref();
            let hit = members
                .iter()
                .filter(|e| predicted.get(*e).and_then(|l| mapping.get(l)) == Some(&ci))
                .count();
            (members.len(), hit)
        })
        .collect()
}

/// Each predicted label is mapped to the ground-truth cluster holding most
/// of its members; the result is the unweighted mean over ground-truth
/// clusters of the fraction of members whose mapped label is their own.
/// Unlabelled members count as misses.
pub fn clustering_accuracy<G: AsRef<[String]>>(predicted: &Labels, truth: &[G]) -> f64 {
    let per: Vec<f64> = tally(predicted, truth)
        .into_iter()
        .filter(|&(n, _)| n > 0)
        .map(|(n, hit)| hit as f64 / n as f64)
        .collect();
    if per.is_empty() {
        return 0.0;
    }
    per.iter().sum::<f64>() / per.len() as f64
}

/// Same mapping, but the fraction of all expressions assigned correctly.
pub fn clustering_accuracy_weighted<G: AsRef<[String]>>(predicted: &Labels, truth: &[G]) -> f64 {
    let (n, hit) = tally(predicted, truth)
        .into_iter()
        .fold((0, 0), |(n, h), (m, k)| (n + m, h + k));
    if n == 0 {
        0.0
    } else {
        hit as f64 / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn table(rows: &[(&str, &[f64])]) -> EmbeddingTable<f64> {
        let mut t = EmbeddingTable::new(rows[0].1.len());
        for (n, v) in rows {
            t.insert(n, v).unwrap();
        }
        t
    }

    fn labels(pairs: &[(&str, usize)]) -> Labels {
        pairs.iter().map(|&(s, l)| (s.to_string(), l)).collect()
    }

    fn groups(gs: &[&[&str]]) -> Vec<Vec<String>> {
        gs.iter().map(|g| g.iter().map(|s| s.to_string()).collect()).collect()
    }

    #[test]
    fn separated_pairs() {
        let t = table(&[
            ("a", &[0.0, 0.0]),
            ("b", &[10.0, 10.0]),
            ("a'", &[0.1, 0.0]),
            ("b'", &[10.0, 10.1]),
        ]);
        for seed in 0..10 {
            let l = kmeans(&t, 2, seed, DEFAULT_MAX_ITERS).unwrap();
            assert_eq!(l["a"], l["a'"]);
            assert_eq!(l["b"], l["b'"]);
            assert_ne!(l["a"], l["b"]);
        }
    }

    #[test]
    fn k_equals_size() {
        let t = table(&[("a", &[0.0]), ("b", &[1.0]), ("c", &[5.0]), ("d", &[5.5])]);
        let l = kmeans(&t, 4, 3, DEFAULT_MAX_ITERS).unwrap();
        let mut ls: Vec<usize> = l.values().copied().collect();
        ls.sort();
        assert_eq!(ls, [0, 1, 2, 3]);
        assert!(matches!(
            kmeans(&t, 5, 0, 10),
            Err(EmbedError::KTooLarge { k: 5, available: 4 })
        ));
        assert!(kmeans(&t, 0, 0, 10).is_err());
    }

    #[test]
    fn deterministic() {
        let rows: Vec<(String, Vec<f64>)> = (0..30)
            .map(|i| (format!("e{i}"), vec![(i * 7 % 11) as f64, (i * 5 % 13) as f64]))
            .collect();
        let mut t = EmbeddingTable::new(2);
        for (n, v) in &rows {
            t.insert(n, v).unwrap();
        }
        assert_eq!(kmeans(&t, 4, 9, 300).unwrap(), kmeans(&t, 4, 9, 300).unwrap());
    }

    #[test]
    fn four_point_fixture() {
        let truth = groups(&[&["a", "b"], &["c", "d"]]);
        let pred = labels(&[("a", 0), ("b", 1), ("c", 1), ("d", 1)]);
        assert_eq!(clustering_accuracy(&pred, &truth), 0.75);
        assert_eq!(clustering_accuracy_weighted(&pred, &truth), 0.75);
        let perfect = labels(&[("a", 7), ("b", 7), ("c", 2), ("d", 2)]);
        assert_eq!(clustering_accuracy(&perfect, &truth), 1.0);
    }

    #[test]
    fn weighted_differs_for_unequal_sizes() {
        let truth = groups(&[&["a", "b", "c", "d"], &["e"]]);
        let pred = labels(&[("a", 0), ("b", 0), ("c", 0), ("d", 0), ("e", 0)]);
        assert_eq!(clustering_accuracy(&pred, &truth), 0.5);
        assert_eq!(clustering_accuracy_weighted(&pred, &truth), 0.8);
    }

    proptest! {
        #[test]
        fn perfect_labels_score_one(assign in prop::collection::vec(0usize..6, 1..60), offset in 0usize..100) {
            let mut truth: Vec<Vec<String>> = vec![Vec::new(); 6];
            let mut pred = Labels::new();
            for (i, &c) in assign.iter().enumerate() {
                truth[c].push(format!("e{i}"));
                pred.insert(format!("e{i}"), c * 3 + offset);
            }
            truth.retain(|g| !g.is_empty());
            prop_assert_eq!(clustering_accuracy(&pred, &truth), 1.0);
            prop_assert_eq!(clustering_accuracy_weighted(&pred, &truth), 1.0);
        }
    }
}
