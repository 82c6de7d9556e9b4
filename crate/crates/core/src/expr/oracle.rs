//! Numeric equivalence oracle.
//!
//! Two expressions are judged equivalent when they agree, within a relative
//! tolerance, at enough points where both are defined. Points are drawn from
//! a fixed seeded stream so every verdict is reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{evaluate, Assignment, EvalConfig, Expr, Op, Var};

/// `|a - b| <= tol * max(1, |a|, |b|)`: relative, with an absolute floor near zero.
pub fn approx_eq(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Verdict {
    /// Agreement at `points` mutually defined points.
    Equivalent { points: usize },
    /// A mutually defined point where the values disagree.
    NotEquivalent { x: f64, left: f64, right: f64 },
    /// Fewer than the required number of mutually defined points.
    Inconclusive { points: usize },
}

impl Verdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, Verdict::Equivalent { .. })
    }

    pub fn is_not_equivalent(&self) -> bool {
        matches!(self, Verdict::NotEquivalent { .. })
    }
}

#[derive(Debug, Clone)]
pub struct Oracle {
    /// Relative tolerance for agreement.
    pub tolerance: f64,
    /// Mutually defined points required for an `Equivalent` verdict.
    pub min_points: usize,
    /// Reference points collected per comparison.
    pub probe_points: usize,
    /// Upper bound on candidate draws when searching for defined points.
    pub max_draws: usize,
    pub seed: u64,
    pub eval: EvalConfig,
    pub var: Var,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle {
            tolerance: 1e-6,
            min_points: 5,
            probe_points: 16,
            max_draws: 4000,
            seed: 0x5eed,
            eval: EvalConfig::default(),
            var: Var::new("x"),
        }
    }
}

impl Oracle {
    fn assignment(&self, x: f64) -> Assignment<f64> {
        let mut a = Assignment::with_config(self.eval);
        a.wrt = self.var.clone();
        a.set(self.var.as_str(), x);
        a
    }

    /// Value at `x`, or `None` when undefined or numerically unstable.
    ///
    /// Expressions containing `d/dx` are also evaluated with a doubled
    /// step; points where the two estimates disagree beyond tolerance are
    /// treated as undefined because the finite difference is unreliable there.
    pub fn value(&self, e: &Expr, x: f64) -> Option<f64> {
        self.value_with(e, &self.assignment(x))
    }

    /// Like [`Oracle::value`] under an arbitrary binding of variables.
    pub fn value_with(&self, e: &Expr, a: &Assignment<f64>) -> Option<f64> {
        let v = evaluate(e, a).ok()??;
        if e.contains_op(Op::Deriv) {
            let coarse = evaluate(e, &a.clone().with_step(a.h * 2.0)).ok()??;
            if !approx_eq(v, coarse, self.tolerance * 0.1) {
                return None;
            }
        }
        Some(v)
    }

    /// Candidate abscissae: alternating narrow and wide uniform draws.
    fn draws(&self) -> impl Iterator<Item = f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (0..self.max_draws).map(move |i| match i % 3 {
            0 => rng.random_range(-4.0..4.0),
            1 => rng.random_range(-1.0..1.0),
            _ => rng.random_range(-10.0..10.0),
        })
    }

    /// Points where `reference` is defined, with its values there.
    pub fn reference_points(&self, reference: &Expr) -> Vec<(f64, f64)> {
        self.draws()
            .filter_map(|x| self.value(reference, x).map(|v| (x, v)))
            .take(self.probe_points)
            .collect()
    }

    /// Compares `other` against precomputed reference values.
    pub fn compare_at(&self, points: &[(f64, f64)], other: &Expr) -> Verdict {
        let mut shared = 0;
        for &(x, want) in points {
            if let Some(got) = self.value(other, x) {
                if !approx_eq(want, got, self.tolerance) {
                    return Verdict::NotEquivalent {
                        x,
                        left: want,
                        right: got,
                    };
                }
                shared += 1;
            }
        }
        if shared >= self.min_points {
            Verdict::Equivalent { points: shared }
        } else {
            Verdict::Inconclusive { points: shared }
        }
    }

    pub fn check(&self, a: &Expr, b: &Expr) -> Verdict {
        let pts = self.reference_points(a);
        self.compare_at(&pts, b)
    }

    /// Whether `e` has enough defined points to be audited at all.
    pub fn has_domain(&self, e: &Expr) -> bool {
        self.reference_points(e).len() >= self.min_points
    }
}
