use std::ops::RangeInclusive;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Cluster, CorpusError};
use crate::expr::mutate_any;
use crate::expr::oracle::Oracle;
use crate::expr::{Expr, MutationOptions};
use crate::rules::RewriteRule;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Derivation {
    pub id: usize,
    /// Prefix strings.
    pub steps: Vec<String>,
    /// Index `k` marks the transition from step `k - 1` to step `k` as wrong.
    pub mistakes: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DerivationConfig {
    /// Transitions per derivation, drawn uniformly.
    pub steps: RangeInclusive<usize>,
    pub mistake_prob: f64,
    /// Derivations to produce; `None` gives one per cluster.
    pub count: Option<usize>,
    /// Rewrites longer than this (or than the start, if longer) are not taken.
    pub max_tokens: usize,
    pub mutation: MutationOptions,
    pub oracle: Oracle,
}

impl Default for DerivationConfig {
    fn default() -> Self {
        DerivationConfig {
            steps: 4..=8,
            mistake_prob: 0.2,
            count: None,
            max_tokens: 25,
            mutation: MutationOptions::default(),
            oracle: Oracle::default(),
        }
    }
}

const MUTATION_RETRIES: usize = 10;

/// Every single-rule rewrite of `e` at any subterm, in (rule, site) order.
fn rewrites(e: &Expr, rules: &[RewriteRule], max_tokens: usize) -> Vec<Expr> {
    let mut subterms = Vec::new();
    e.visit_preorder(&mut |s| subterms.push(s));
    let mut out = Vec::new();
    for rule in rules.iter().filter(|r| !r.expansive) {
        for (site, sub) in subterms.iter().enumerate() {
            if let Some(bindings) = rule.lhs.match_expr(sub) {
                let next = e.replace_at(site, rule.rhs.instantiate(&bindings));
                if next != *e && next.token_count() <= max_tokens {
                    out.push(next);
                }
            }
        }
    }
    out
}

/// A rewrite of `e` the oracle confirms, chosen uniformly among those that pass.
fn correct_step<R: Rng>(
    e: &Expr,
    rules: &[RewriteRule],
    cfg: &DerivationConfig,
    limit: usize,
    rng: &mut R,
) -> Option<Expr> {
    let mut cands = rewrites(e, rules, limit);
    cands.shuffle(rng);
    let points = cfg.oracle.reference_points(e);
    cands
        .into_iter()
        .find(|c| cfg.oracle.compare_at(&points, c).is_equivalent())
}

fn mistake_step<R: Rng>(e: &Expr, cfg: &DerivationConfig, rng: &mut R) -> Option<Expr> {
    let points = cfg.oracle.reference_points(e);
    (0..MUTATION_RETRIES).find_map(|_| {
        let m = mutate_any(e, rng, &cfg.mutation).ok()?;
        cfg.oracle.compare_at(&points, &m).is_not_equivalent().then_some(m)
    })
}

fn derive_one(
    start: &Expr,
    rules: &[RewriteRule],
    cfg: &DerivationConfig,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec<String>, Vec<usize>)> {
    let limit = cfg.max_tokens.max(start.token_count());
    let len = rng.random_range(cfg.steps.clone());
    let mut cur = start.clone();
    let mut steps = vec![cur.to_prefix()];
    let mut mistakes = Vec::new();
    for k in 1..=len {
        let mut next = None;
        if rng.random_bool(cfg.mistake_prob) {
            next = mistake_step(&cur, cfg, rng);
            if next.is_some() {
                mistakes.push(k);
            }
        }
        let next = match next.or_else(|| correct_step(&cur, rules, cfg, limit, rng)) {
            Some(n) => n,
            // Dead end: keep what we have, if anything.
            None if k > 1 => break,
            None => return None,
        };
        steps.push(next.to_prefix());
        cur = next;
    }
    Some((steps, mistakes))
}

/// Rewrite chains starting from cluster seeds. Each transition either applies
/// one non-expansive rule at one subterm, checked equivalent by the oracle,
/// or with probability `mistake_prob` is a single-node mutation checked not
/// equivalent. A mutation that keeps failing the check falls back to a
/// correct step. Starts with no applicable rule are skipped; a chain that
/// runs dry midway is cut short.
///
/// Derivation `i` starts from cluster `i mod n` and draws from its own
/// stream derived from `(seed, i)`, so output is independent of `count`.
pub fn generate_derivations(
    clusters: &[Cluster],
    rules: &[RewriteRule],
    seed: u64,
    cfg: &DerivationConfig,
) -> Result<Vec<Derivation>, CorpusError> {
    if rules.is_empty() {
        return Err(CorpusError::NoRules);
    }
    let starts: Vec<Expr> = clusters.iter().filter_map(|c| Expr::parse(&c.seed).ok()).collect();
    if starts.is_empty() {
        return Ok(Vec::new());
    }
    let count = cfg.count.unwrap_or(starts.len());
    let mut out = Vec::new();
    for i in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        if let Some((steps, mistakes)) = derive_one(&starts[i % starts.len()], rules, cfg, &mut rng) {
            out.push(Derivation {
                id: out.len(),
                steps,
                mistakes,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::dataset::tests::cluster;
    use crate::rules::builtin;

    fn full() -> Vec<RewriteRule> {
        builtin("full").unwrap()
    }

    fn seeds() -> Vec<Cluster> {
        [
            "- tanh + * 3 x 4 6",
            "* sin x cos x",
            "+ pow x 2 * 2 x",
            "d/dx * x sin x",
        ]
        .iter()
        .enumerate()
        .map(|(i, s)| cluster(i, &[s]))
        .collect()
    }

    #[test]
    fn no_mistakes_means_all_equivalent() {
        let cfg = DerivationConfig {
            mistake_prob: 0.0,
            ..Default::default()
        };
        let ds = generate_derivations(&seeds(), &full(), 5, &cfg).unwrap();
        assert_eq!(ds.len(), 4);
        let o = Oracle::default();
        for d in &ds {
            assert!(d.mistakes.is_empty());
            assert!(d.steps.len() >= 2);
            for w in d.steps.windows(2) {
                let (a, b) = (Expr::parse(&w[0]).unwrap(), Expr::parse(&w[1]).unwrap());
                assert!(o.check(&a, &b).is_equivalent(), "{} -> {}", w[0], w[1]);
            }
        }
    }

    #[test]
    fn always_mistaken_single_step() {
        let cfg = DerivationConfig {
            steps: 1..=1,
            mistake_prob: 1.0,
            ..Default::default()
        };
        let ds = generate_derivations(&seeds(), &full(), 9, &cfg).unwrap();
        for d in &ds {
            assert_eq!(d.steps.len(), 2);
            assert_eq!(d.mistakes, [1]);
        }
    }

    #[test]
    fn mistakes_match_oracle() {
        let cfg = DerivationConfig {
            count: Some(12),
            mistake_prob: 0.3,
            ..Default::default()
        };
        let ds = generate_derivations(&seeds(), &full(), 1, &cfg).unwrap();
        let o = Oracle::default();
        for d in &ds {
            for (k, w) in d.steps.windows(2).enumerate() {
                let (a, b) = (Expr::parse(&w[0]).unwrap(), Expr::parse(&w[1]).unwrap());
                let wrong = d.mistakes.contains(&(k + 1));
                let v = o.check(&a, &b);
                assert_eq!(v.is_not_equivalent(), wrong, "{} -> {}: {v:?}", w[0], w[1]);
                assert_eq!(v.is_equivalent(), !wrong);
            }
        }
    }

    #[test]
    fn replayable_and_prefix_stable() {
        let cfg = |n| DerivationConfig {
            count: Some(n),
            ..Default::default()
        };
        let a = generate_derivations(&seeds(), &full(), 3, &cfg(6)).unwrap();
        let b = generate_derivations(&seeds(), &full(), 3, &cfg(6)).unwrap();
        let c = generate_derivations(&seeds(), &full(), 3, &cfg(3)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a[..3], c[..]);
    }

    #[test]
    fn no_rules_is_an_error() {
        assert!(matches!(
            generate_derivations(&seeds(), &[], 0, &DerivationConfig::default()),
            Err(CorpusError::NoRules)
        ));
    }

    #[test]
    fn start_without_rewrites_is_skipped() {
        let rules = builtin("fig1").unwrap();
        let cs = [cluster(0, &["sin x"]), cluster(1, &["- + x 8 8"])];
        let ds = generate_derivations(
            &cs,
            &rules,
            0,
            &DerivationConfig {
                mistake_prob: 0.0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds[0].id, 0);
        assert_eq!(ds[0].steps[0], "- + x 8 8");
    }
}
