//! Numeric e-class analysis. Every class carries its values at fixed sample
//! abscissae, each widened to a small finite-difference stencil so that
//! `d/dx` can be computed from the child's values. `NaN` marks undefined.
//!
//! Rewrites use it as a guard: a match is applied only when the instantiated
//! right-hand side is defined at exactly the samples where the class is, and
//! agrees with it there. This keeps almost-everywhere rules from equating an
//! everywhere-undefined term (say `(/ 0 0)`) with anything.

use super::{EGraph, Id, Subst};
use crate::expr::oracle::approx_eq;
use crate::expr::{binary, unary, Constant, Op, Symbol};
use crate::rules::PatNode;

/// Sample abscissae for `x`, away from the usual special points.
pub(crate) const SAMPLES: [f64; 10] = [-3.71, -2.23, -1.37, -0.61, -0.17, 0.29, 0.73, 1.41, 2.57, 3.93];
const REACH: usize = 2;
const WIDTH: usize = 2 * REACH + 1;
pub(crate) const SLOTS: usize = SAMPLES.len() * WIDTH;
const H: f64 = 1e-5;
const MAGNITUDE_LIMIT: f64 = 1e12;
const TOLERANCE: f64 = 1e-6;

pub(crate) type Values = Box<[f64]>;

fn filled(v: f64) -> Values {
    vec![v; SLOTS].into_boxed_slice()
}

/// Stable pseudo-value for a variable other than `x`, constant in `x`.
fn free_var_value(name: &str) -> f64 {
    let h = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
    });
    0.5 + (h % 2000) as f64 / 1000.0
}

fn leaf(sym: &Symbol) -> Values {
    match sym {
        Symbol::Int(n) => filled(*n as f64),
        Symbol::Const(Constant::Pi) => filled(std::f64::consts::PI),
        Symbol::Const(Constant::E) => filled(std::f64::consts::E),
        Symbol::Var(v) if v.as_str() == "x" => (0..SLOTS)
            .map(|s| SAMPLES[s / WIDTH] + (s % WIDTH) as f64 * H - REACH as f64 * H)
            .collect(),
        Symbol::Var(v) => filled(free_var_value(v.as_str())),
        Symbol::Op(op) => panic!("`{op}` is not a leaf"),
    }
}

fn guard(v: Option<f64>) -> f64 {
    match v {
        Some(v) if v.is_finite() && v.abs() <= MAGNITUDE_LIMIT => v,
        _ => f64::NAN,
    }
}

pub(crate) fn make(sym: &Symbol, children: &[&[f64]]) -> Values {
    let op = match sym {
        Symbol::Op(op) => *op,
        leaf_sym => return leaf(leaf_sym),
    };
    (0..SLOTS)
        .map(|s| match op {
            Op::Deriv => {
                let k = s % WIDTH;
                if k == 0 || k == WIDTH - 1 {
                    return f64::NAN;
                }
                let (hi, lo) = (children[0][s + 1], children[0][s - 1]);
                guard(Some((hi - lo) / (2.0 * H)))
            }
            _ if op.is_binary() => {
                let (l, r) = (children[0][s], children[1][s]);
                if l.is_nan() || r.is_nan() {
                    return f64::NAN;
                }
                guard(binary(op, l, r))
            }
            _ => {
                let u = children[0][s];
                if u.is_nan() {
                    return f64::NAN;
                }
                guard(unary(op, u))
            }
        })
        .collect()
}

/// Fills undefined slots of `into` from `from`. True if anything changed.
pub(crate) fn merge(into: &mut [f64], from: &[f64]) -> bool {
    let mut changed = false;
    for (a, &b) in into.iter_mut().zip(from) {
        if a.is_nan() && !b.is_nan() {
            *a = b;
            changed = true;
        }
    }
    changed
}

/// Same domain and values at the sample centres.
pub(crate) fn agrees(class: &[f64], candidate: &[f64]) -> bool {
    (0..SAMPLES.len()).all(|i| {
        let s = i * WIDTH + REACH;
        match (class[s].is_nan(), candidate[s].is_nan()) {
            (true, true) => true,
            (false, false) => approx_eq(class[s], candidate[s], TOLERANCE),
            _ => false,
        }
    })
}

impl EGraph {
    pub(crate) fn values(&self, id: Id) -> &[f64] {
        let id = self.find(id);
        &self.classes[id.index()]
            .as_ref()
            .expect("canonical id has a class")
            .data
    }

    /// Values the instantiation of `p` under `subst` would have, without adding it.
    pub(crate) fn pattern_values(&self, p: &PatNode, subst: &Subst) -> Values {
        match p {
            PatNode::Var(v) => self.values(subst.get(*v)).into(),
            PatNode::Node(sym, kids) => {
                let vals: Vec<Values> = kids.iter().map(|k| self.pattern_values(k, subst)).collect();
                let refs: Vec<&[f64]> = vals.iter().map(|v| &v[..]).collect();
                make(sym, &refs)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{evaluate, Assignment, Expr};

    fn centre(g: &EGraph, id: Id, i: usize) -> f64 {
        g.values(id)[i * WIDTH + REACH]
    }

    #[test]
    fn values_match_evaluator() {
        for s in ["+ sin x 1", "/ 1 x", "ln - x 1", "d/dx * x sin x", "asin x", "pow x 3"] {
            let e = Expr::parse(s).unwrap();
            let mut g = EGraph::new();
            let id = g.add_expr(&e).unwrap();
            for (i, &x) in SAMPLES.iter().enumerate() {
                let want = evaluate(&e, &Assignment::x(x)).unwrap();
                let got = centre(&g, id, i);
                match want {
                    Some(w) => assert!(approx_eq(w, got, 1e-9), "{s} at {x}: {w} vs {got}"),
                    None => assert!(got.is_nan(), "{s} at {x}: {got}"),
                }
            }
        }
    }

    #[test]
    fn union_fills_and_propagates() {
        let mut g = EGraph::new();
        // ln(-2) is undefined everywhere until its class learns it equals 1.
        let a = g.add_expr(&Expr::parse("ln - 0 2").unwrap()).unwrap();
        let parent = g.add_expr(&Expr::parse("+ ln - 0 2 1").unwrap()).unwrap();
        assert!(g.values(parent).iter().all(|v| v.is_nan()));
        let one = g.add_expr(&Expr::parse("1").unwrap()).unwrap();
        g.union(a, one);
        g.rebuild();
        assert_eq!(centre(&g, parent, 0), 2.0);
    }

    #[test]
    fn agreement_requires_equal_domains() {
        let nan = f64::NAN;
        let mut a = filled(1.0);
        let b = filled(1.0);
        assert!(agrees(&a, &b));
        a[REACH] = nan;
        assert!(!agrees(&a, &b));
        assert!(!agrees(&b, &a));
        assert!(agrees(&filled(nan), &filled(nan)));
        assert!(!agrees(&filled(1.0), &filled(1.5)));
    }

    #[test]
    fn free_variables_are_constant_in_x() {
        let v = leaf(&Expr::var("y").symbol());
        let d = make(&Symbol::Op(Op::Deriv), &[&v]);
        assert_eq!(d[REACH], 0.0);
    }
}
