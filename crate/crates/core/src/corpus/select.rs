use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Cluster, CorpusError};
use crate::expr::oracle::Oracle;
use crate::expr::{mutate_any, Expr, MutationOptions};

pub const CANDIDATES: usize = 7;
const DISTRACTORS_PER_SIDE: usize = 3;
const ATTEMPTS_PER_DISTRACTOR: usize = 20;
const ATTEMPTS_PER_TEST: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionTest {
    pub query: String,
    pub candidates: Vec<String>,
    pub answer: usize,
}

fn distractors<R: Rng>(
    parent: &Expr,
    points: &[(f64, f64)],
    taken: &mut Vec<String>,
    oracle: &Oracle,
    opts: &MutationOptions,
    rng: &mut R,
) -> Option<Vec<String>> {
    let mut out = Vec::new();
    for _ in 0..ATTEMPTS_PER_DISTRACTOR * DISTRACTORS_PER_SIDE {
        if out.len() == DISTRACTORS_PER_SIDE {
            break;
        }
        let Ok(m) = mutate_any(parent, rng, opts) else {
            return None;
        };
        let s = m.to_prefix();
        if !taken.contains(&s) && oracle.compare_at(points, &m).is_not_equivalent() {
            taken.push(s.clone());
            out.push(s);
        }
    }
    (out.len() == DISTRACTORS_PER_SIDE).then_some(out)
}

fn one_test<R: Rng>(cluster: &Cluster, oracle: &Oracle, opts: &MutationOptions, rng: &mut R) -> Option<SelectionTest> {
    let pair: Vec<&String> = cluster.exprs.choose_multiple(rng, 2).collect();
    let (q, a) = (pair[0], pair[1]);
    let (qe, ae) = (Expr::parse(q).ok()?, Expr::parse(a).ok()?);
    let points = oracle.reference_points(&qe);
    if !oracle.compare_at(&points, &ae).is_equivalent() {
        return None;
    }
    let mut taken = vec![q.clone(), a.clone()];
    let mut candidates = distractors(&qe, &points, &mut taken, oracle, opts, rng)?;
    candidates.extend(distractors(&ae, &points, &mut taken, oracle, opts, rng)?);
    candidates.push(a.clone());
    candidates.shuffle(rng);
    let answer = candidates.iter().position(|c| c == a).expect("answer present");
    Some(SelectionTest {
        query: q.clone(),
        candidates,
        answer,
    })
}

/// Seven-way multiple choice: query and answer from one cluster, plus three
/// single-node mutations of each, all checked not equivalent to the query.
///
/// Test `i` draws from its own stream derived from `(seed, i)`; a draw that
/// cannot produce enough distractors is retried with a fresh pair, and a
/// test that keeps failing is dropped.
pub fn make_selection_tests(clusters: &[Cluster], seed: u64, count: usize) -> Result<Vec<SelectionTest>, CorpusError> {
    let eligible: Vec<&Cluster> = clusters.iter().filter(|c| c.exprs.len() >= 2).collect();
    if eligible.is_empty() {
        return Err(CorpusError::ClusterTooSmall);
    }
    let oracle = Oracle::default();
    let opts = MutationOptions::default();
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let test = (0..ATTEMPTS_PER_TEST).find_map(|_| {
            let c = eligible.choose(&mut rng).expect("nonempty");
            one_test(c, &oracle, &opts, &mut rng)
        });
        out.extend(test);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::dataset::tests::cluster;

    fn table4() -> Vec<Cluster> {
        vec![
            cluster(0, &["d/dx + * 2 x / sin - x 4 6", "+ 2 / cos - x 4 6"]),
            cluster(
                1,
                &[
                    "- tanh + * 3 x 4 6",
                    "- / 1 coth + * 3 x 4 6",
                    "- / sinh + * 3 x 4 cosh + * 3 x 4 6",
                ],
            ),
            cluster(2, &["x"]),
        ]
    }

    #[test]
    fn shape_and_single_equivalent() {
        let tests = make_selection_tests(&table4(), 11, 10).unwrap();
        assert_eq!(tests.len(), 10);
        let o = Oracle::default();
        for t in &tests {
            assert_eq!(t.candidates.len(), CANDIDATES);
            let q = Expr::parse(&t.query).unwrap();
            let equivalent: Vec<usize> = (0..CANDIDATES)
                .filter(|&i| o.check(&q, &Expr::parse(&t.candidates[i]).unwrap()).is_equivalent())
                .collect();
            assert_eq!(equivalent, [t.answer]);
            let mut uniq = t.candidates.clone();
            uniq.sort();
            uniq.dedup();
            assert_eq!(uniq.len(), CANDIDATES);
        }
    }

    #[test]
    fn distractors_are_one_edit_away() {
        for t in make_selection_tests(&table4(), 2, 6).unwrap() {
            let q = Expr::parse(&t.query).unwrap();
            let a = Expr::parse(&t.candidates[t.answer]).unwrap();
            let (mut from_q, mut from_a) = (0, 0);
            for (i, c) in t.candidates.iter().enumerate() {
                if i == t.answer {
                    continue;
                }
                let c = Expr::parse(c).unwrap();
                match (q.node_diff(&c), a.node_diff(&c)) {
                    (Some(1), _) => from_q += 1,
                    (_, Some(1)) => from_a += 1,
                    other => panic!("{c} is not one edit from either parent: {other:?}"),
                }
            }
            assert_eq!(from_q + from_a, 6);
            assert!(from_q >= 3);
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            make_selection_tests(&table4(), 4, 5).unwrap(),
            make_selection_tests(&table4(), 4, 5).unwrap()
        );
    }

    #[test]
    fn singletons_only() {
        assert!(matches!(
            make_selection_tests(&[cluster(0, &["x"])], 0, 1),
            Err(CorpusError::ClusterTooSmall)
        ));
    }
}
