use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Expr, Op};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MutationMode {
    /// Replace one operator with a different operator of the same arity.
    OperatorSwap,
    /// Replace one integer literal with a different integer.
    NumeralEdit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum MutationError {
    #[error("expression has no site for {0:?}")]
    NoMutableSite(MutationMode),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MutationOptions {
    /// Inclusive range for replacement literals; zero is never produced.
    pub int_min: i64,
    pub int_max: i64,
}

impl Default for MutationOptions {
    fn default() -> Self {
        MutationOptions {
            int_min: -9,
            int_max: 9,
        }
    }
}

// d/dx is neither swapped out nor swapped in: nesting derivatives degrades the
// finite-difference oracle.
fn swap_candidates(op: Op) -> impl Iterator<Item = Op> {
    Op::ALL
        .iter()
        .copied()
        .filter(move |o| *o != op && o.arity() == op.arity() && *o != Op::Deriv)
}

/// Pre-order indices of nodes that `mode` can change.
pub fn mutation_sites(e: &Expr, mode: MutationMode, opts: &MutationOptions) -> Vec<usize> {
    let mut sites = Vec::new();
    let mut i = 0;
    e.visit_preorder(&mut |node| {
        let ok = match (mode, node) {
            (MutationMode::OperatorSwap, Expr::Op(op, _)) => *op != Op::Deriv && swap_candidates(*op).next().is_some(),
            (MutationMode::NumeralEdit, Expr::Int(n)) => numeral_candidates(*n, opts).next().is_some(),
            _ => false,
        };
        if ok {
            sites.push(i);
        }
        i += 1;
    });
    sites
}

fn numeral_candidates(n: i64, opts: &MutationOptions) -> impl Iterator<Item = i64> {
    (opts.int_min..=opts.int_max).filter(move |&k| k != 0 && k != n)
}

/// Seeded single-node mutation. The result differs from `e` at exactly one node.
pub fn mutate(e: &Expr, seed: u64, mode: MutationMode, opts: &MutationOptions) -> Result<Expr, MutationError> {
    mutate_with(e, &mut ChaCha8Rng::seed_from_u64(seed), mode, opts)
}

pub(crate) fn mutate_with<R: Rng + ?Sized>(
    e: &Expr,
    rng: &mut R,
    mode: MutationMode,
    opts: &MutationOptions,
) -> Result<Expr, MutationError> {
    let sites = mutation_sites(e, mode, opts);
    let &site = sites.choose(rng).ok_or(MutationError::NoMutableSite(mode))?;
    let target = e.subterm(site).expect("site index in range");
    let replacement = match target {
        Expr::Op(op, children) => {
            let alts: Vec<Op> = swap_candidates(*op).collect();
            Expr::Op(*alts.choose(rng).expect("site has alternatives"), children.clone())
        }
        Expr::Int(n) => {
            let alts: Vec<i64> = numeral_candidates(*n, opts).collect();
            Expr::Int(*alts.choose(rng).expect("site has alternatives"))
        }
        _ => unreachable!("sites are operators or integers"),
    };
    Ok(e.replace_at(site, replacement))
}

/// Mutation with a randomly chosen mode among those that have sites.
pub(crate) fn mutate_any<R: Rng + ?Sized>(
    e: &Expr,
    rng: &mut R,
    opts: &MutationOptions,
) -> Result<Expr, MutationError> {
    let modes: Vec<MutationMode> = [MutationMode::OperatorSwap, MutationMode::NumeralEdit]
        .into_iter()
        .filter(|m| !mutation_sites(e, *m, opts).is_empty())
        .collect();
    let &mode = modes
        .choose(rng)
        .ok_or(MutationError::NoMutableSite(MutationMode::OperatorSwap))?;
    mutate_with(e, rng, mode, opts)
}
