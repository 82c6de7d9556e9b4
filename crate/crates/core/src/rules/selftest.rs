//! Numeric self-test for rewrite rules.
//!
//! Each pattern variable `?v_i` is replaced by the linear term
//! `(+ (* k_i x) c_i)` where `c_i` is a fresh variable, so that `d/dx` rules
//! see inputs with a non-trivial derivative. A trial draws `x`, an integer
//! slope `k_i`, and a target value for each variable from a value range
//! ("regime"); `c_i` is solved so the variable takes that value at `x`.
//!
//! The regime is picked per rule: the one under which most probe trials
//! leave both sides defined. This lets `asin`-style and `acosh`-style rules
//! each be tested on their natural domain.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::RewriteRule;
use crate::expr::oracle::{approx_eq, Oracle};
use crate::expr::{Assignment, Expr, Op, Var};

/// Candidate value ranges for pattern variables, in preference order.
pub const REGIMES: [(f64, f64); 6] = [
    (-4.0, 4.0),
    (-1.0, 1.0),
    (0.1, 4.0),
    (1.0, 4.0),
    (0.05, 0.95),
    (-4.0, -1.0),
];

const SLOPES: [i64; 5] = [1, 2, 3, -1, -2];
const PROBE_TRIALS: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub lhs: String,
    pub rhs: String,
    pub x: f64,
    pub bindings: Vec<(String, f64)>,
    pub lhs_value: f64,
    pub rhs_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelfTestReport {
    pub rule: String,
    pub regime: (f64, f64),
    pub trials: usize,
    /// Trials where both sides were defined.
    pub defined: usize,
    pub counterexample: Option<Counterexample>,
}

impl SelfTestReport {
    /// No disagreement, and at least half the trials produced a defined pair.
    pub fn passed(&self) -> bool {
        self.counterexample.is_none() && self.defined * 2 >= self.trials
    }
}

struct Trial {
    lhs: Expr,
    rhs: Expr,
    assignment: Assignment<f64>,
    x: f64,
}

fn draw_trial(rule: &RewriteRule, regime: (f64, f64), rng: &mut ChaCha8Rng) -> Trial {
    let x: f64 = rng.random_range(-1.0..1.0);
    let mut a = Assignment::x(x);
    let bindings: Vec<Expr> = (0..rule.lhs.var_count())
        .map(|i| {
            let k = SLOPES[rng.random_range(0..SLOPES.len())];
            let value: f64 = rng.random_range(regime.0..regime.1);
            let c = format!("c{i}");
            a.set(&c, value - k as f64 * x);
            Expr::binary(
                Op::Add,
                Expr::binary(Op::Mul, Expr::Int(k), Expr::var("x")),
                Expr::var(&c),
            )
        })
        .collect();
    Trial {
        lhs: rule.lhs.instantiate(&bindings),
        rhs: rule.rhs.instantiate(&bindings),
        assignment: a,
        x,
    }
}

fn run(rule: &RewriteRule, regime: (f64, f64), trials: usize, seed: u64, oracle: &Oracle) -> SelfTestReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut defined = 0;
    let mut counterexample = None;
    for _ in 0..trials {
        let t = draw_trial(rule, regime, &mut rng);
        let (Some(l), Some(r)) = (
            oracle.value_with(&t.lhs, &t.assignment),
            oracle.value_with(&t.rhs, &t.assignment),
        ) else {
            continue;
        };
        defined += 1;
        if counterexample.is_none() && !approx_eq(l, r, oracle.tolerance) {
            let bindings = (0..rule.lhs.var_count())
                .map(|i| {
                    let c = format!("c{i}");
                    let v = t.assignment.get(&Var::new(&c)).unwrap_or(f64::NAN);
                    (c, v)
                })
                .collect();
            counterexample = Some(Counterexample {
                lhs: t.lhs.to_prefix(),
                rhs: t.rhs.to_prefix(),
                x: t.x,
                bindings,
                lhs_value: l,
                rhs_value: r,
            });
        }
    }
    SelfTestReport {
        rule: rule.name.clone(),
        regime,
        trials,
        defined,
        counterexample,
    }
}

/// Picks the regime with the most co-defined probe trials, then runs
/// `trials` fresh trials in it.
pub fn self_test(rule: &RewriteRule, trials: usize, seed: u64) -> SelfTestReport {
    let oracle = Oracle::default();
    let mut best = REGIMES[0];
    let mut best_defined = 0;
    for (i, &regime) in REGIMES.iter().enumerate() {
        let probe = run(rule, regime, PROBE_TRIALS, seed ^ ((i as u64 + 1) << 32), &oracle);
        if probe.defined > best_defined {
            best = regime;
            best_defined = probe.defined;
        }
        if probe.defined == PROBE_TRIALS {
            break;
        }
    }
    run(rule, best, trials, seed, &oracle)
}
