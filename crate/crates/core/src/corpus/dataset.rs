use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Cluster, CorpusError};

/// All ordered pairs of distinct members within each cluster, cluster by
/// cluster: `n * (n - 1)` per cluster.
pub fn make_pairs(clusters: &[Cluster]) -> impl Iterator<Item = (&str, &str)> {
    clusters.iter().flat_map(|c| {
        let xs = &c.exprs;
        (0..xs.len()).flat_map(move |i| {
            (0..xs.len())
                .filter(move |&j| j != i)
                .map(move |j| (xs[i].as_str(), xs[j].as_str()))
        })
    })
}

/// `count` (anchor, positive, negative) triplets. The anchor cluster is drawn
/// uniformly among clusters with at least two members, anchor and positive
/// are distinct members of it, and the negative is uniform over every
/// expression of every other cluster.
pub fn make_triplets(clusters: &[Cluster], seed: u64, count: usize) -> Result<Vec<(&str, &str, &str)>, CorpusError> {
    if clusters.len() < 2 {
        return Err(CorpusError::InsufficientClusters(clusters.len()));
    }
    let eligible: Vec<usize> = (0..clusters.len()).filter(|&i| clusters[i].exprs.len() >= 2).collect();
    if eligible.is_empty() {
        return Err(CorpusError::ClusterTooSmall);
    }
    let mut offsets = Vec::with_capacity(clusters.len() + 1);
    offsets.push(0);
    for c in clusters {
        offsets.push(offsets.last().unwrap() + c.exprs.len());
    }
    let total = *offsets.last().unwrap();
    let lookup = |flat: usize| -> &str {
        let ci = offsets.partition_point(|&o| o <= flat) - 1;
        &clusters[ci].exprs[flat - offsets[ci]]
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let ci = eligible[rng.random_range(0..eligible.len())];
        let xs = &clusters[ci].exprs;
        let a = rng.random_range(0..xs.len());
        let mut p = rng.random_range(0..xs.len() - 1);
        if p >= a {
            p += 1;
        }
        let own = xs.len();
        let mut r = rng.random_range(0..total - own);
        if r >= offsets[ci] {
            r += own;
        }
        out.push((xs[a].as_str(), xs[p].as_str(), lookup(r)));
    }
    Ok(out)
}

/// Splits at cluster granularity: `round(fraction * n)` clusters, chosen by
/// a seeded shuffle, go to the test side. Both sides keep input order.
pub fn split_train_test(
    clusters: &[Cluster],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<Cluster>, Vec<Cluster>), CorpusError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorpusError::InvalidFraction(fraction));
    }
    let n_test = (fraction * clusters.len() as f64).round() as usize;
    let mut order: Vec<usize> = (0..clusters.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_test = vec![false; clusters.len()];
    for &i in &order[..n_test] {
        is_test[i] = true;
    }
    let (test, train): (Vec<_>, Vec<_>) = clusters.iter().cloned().zip(is_test).partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(c, _)| c).collect(),
        test.into_iter().map(|(c, _)| c).collect(),
    ))
}
