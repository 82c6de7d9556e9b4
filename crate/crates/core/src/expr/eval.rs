use thiserror::Error;

use super::{Constant, Expr, Op, Var};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("variable `{0}` has no binding")]
    UnboundVariable(String),
    #[error("finite-difference step must be positive")]
    NonPositiveStep,
}

/// Variable bindings plus the knobs of the numeric semantics.
#[derive(Debug, Clone)]
pub struct Assignment<T = f64> {
    values: Vec<(Var, T)>,
    /// Central-difference step for `d/dx`.
    pub h: T,
    /// Any intermediate with a larger magnitude evaluates to undefined.
    pub magnitude_limit: T,
    /// Variable differentiated by `d/dx`.
    pub wrt: Var,
}

/// Finite-difference step and magnitude guard, independent of the scalar type.
#[derive(Debug, Clone, Copy)]
pub struct EvalConfig {
    pub h: f64,
    pub magnitude_limit: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            h: 1e-5,
            magnitude_limit: 1e12,
        }
    }
}

impl<T: Scalar> Default for Assignment<T> {
    fn default() -> Self {
        Assignment::with_config(EvalConfig::default())
    }
}

impl<T: Scalar> Assignment<T> {
    pub fn with_config(cfg: EvalConfig) -> Self {
        Assignment {
            values: Vec::new(),
            h: T::lit(cfg.h),
            magnitude_limit: T::lit(cfg.magnitude_limit),
            wrt: Var::new("x"),
        }
    }

    /// Single binding `x = value` with default knobs.
    pub fn x(value: T) -> Self {
        Assignment::default().bind("x", value)
    }

    pub fn bind(mut self, name: &str, value: T) -> Self {
        self.set(name, value);
        self
    }

    pub fn set(&mut self, name: &str, value: T) {
        match self.values.iter_mut().find(|(v, _)| v.as_str() == name) {
            Some(slot) => slot.1 = value,
            None => self.values.push((Var::new(name), value)),
        }
    }

    pub fn with_step(mut self, h: T) -> Self {
        self.h = h;
        self
    }

    pub fn get(&self, var: &Var) -> Option<T> {
        self.values.iter().find(|(v, _)| v == var).map(|(_, x)| *x)
    }
}

/// Evaluates `e` under `a`. `Ok(None)` means the value is undefined at this
/// point: a domain error, division by zero, a non-finite intermediate, or an
/// intermediate beyond the magnitude limit.
pub fn evaluate<T: Scalar>(e: &Expr, a: &Assignment<T>) -> Result<Option<T>, EvalError> {
    // Negated so a NaN step is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(a.h > T::zero()) {
        return Err(EvalError::NonPositiveStep);
    }
    Evaluator { a }.eval(e, None)
}

struct Evaluator<'a, T> {
    a: &'a Assignment<T>,
}

impl<T: Scalar> Evaluator<'_, T> {
    fn guard(&self, v: T) -> Option<T> {
        (v.is_finite() && v.abs() <= self.a.magnitude_limit).then_some(v)
    }

    fn lookup(&self, var: &Var, shifted: Option<T>) -> Result<T, EvalError> {
        if *var == self.a.wrt {
            if let Some(x) = shifted {
                return Ok(x);
            }
        }
        self.a
            .get(var)
            .ok_or_else(|| EvalError::UnboundVariable(var.to_string()))
    }

    /// `shifted` overrides the differentiation variable inside `d/dx` probes.
    fn eval(&self, e: &Expr, shifted: Option<T>) -> Result<Option<T>, EvalError> {
        let v = match e {
            Expr::Var(v) => self.lookup(v, shifted)?,
            Expr::Int(n) => T::from_i64(*n).expect("integer literal fits"),
            Expr::Const(Constant::Pi) => T::PI(),
            Expr::Const(Constant::E) => T::E(),
            Expr::Op(Op::Deriv, c) => {
                let x0 = self.lookup(&self.a.wrt, shifted)?;
                let h = self.a.h;
                let hi = self.eval(&c[0], Some(x0 + h))?;
                let lo = self.eval(&c[0], Some(x0 - h))?;
                match (hi, lo) {
                    (Some(hi), Some(lo)) => (hi - lo) / (h + h),
                    _ => return Ok(None),
                }
            }
            Expr::Op(op, c) if op.is_binary() => {
                let (Some(l), Some(r)) = (self.eval(&c[0], shifted)?, self.eval(&c[1], shifted)?) else {
                    return Ok(None);
                };
                match binary(*op, l, r) {
                    Some(v) => v,
                    None => return Ok(None),
                }
            }
            Expr::Op(op, c) => {
                let Some(u) = self.eval(&c[0], shifted)? else {
                    return Ok(None);
                };
                match unary(*op, u) {
                    Some(v) => v,
                    None => return Ok(None),
                }
            }
        };
        Ok(self.guard(v))
    }
}

fn recip<T: Scalar>(u: T) -> Option<T> {
    (u != T::zero()).then(|| T::one() / u)
}

pub(crate) fn binary<T: Scalar>(op: Op, l: T, r: T) -> Option<T> {
    Some(match op {
        Op::Add => l + r,
        Op::Sub => l - r,
        Op::Mul => l * r,
        Op::Div => l / nonzero(r)?,
        Op::Pow => l.powf(r),
        _ => unreachable!("{op} is unary"),
    })
}

fn nonzero<T: Scalar>(u: T) -> Option<T> {
    (u != T::zero()).then_some(u)
}

pub(crate) fn unary<T: Scalar>(op: Op, u: T) -> Option<T> {
    let one = T::one();
    Some(match op {
        Op::Abs => u.abs(),
        Op::Sqrt => u.sqrt(),
        Op::Ln => {
            if u <= T::zero() {
                return None;
            }
            u.ln()
        }
        Op::Sin => u.sin(),
        Op::Cos => u.cos(),
        Op::Tan => u.tan(),
        Op::Csc => one / nonzero(u.sin())?,
        Op::Sec => one / nonzero(u.cos())?,
        Op::Cot => u.cos() / nonzero(u.sin())?,
        Op::Asin => u.asin(),
        Op::Acos => u.acos(),
        Op::Atan => u.atan(),
        Op::Acsc => recip(u)?.asin(),
        Op::Asec => recip(u)?.acos(),
        Op::Acot => recip(u)?.atan(),
        Op::Sinh => u.sinh(),
        Op::Cosh => u.cosh(),
        Op::Tanh => u.tanh(),
        Op::Csch => one / nonzero(u.sinh())?,
        Op::Sech => one / u.cosh(),
        Op::Coth => u.cosh() / nonzero(u.sinh())?,
        Op::Asinh => u.asinh(),
        Op::Acosh => u.acosh(),
        Op::Atanh => u.atanh(),
        Op::Acsch => recip(u)?.asinh(),
        Op::Asech => recip(u)?.acosh(),
        Op::Acoth => recip(u)?.atanh(),
        Op::Add | Op::Sub | Op::Mul | Op::Div | Op::Pow | Op::Deriv => {
            unreachable!("{op} handled by caller")
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: f64) -> Option<f64> {
        evaluate(&Expr::parse(s).unwrap(), &Assignment::x(x)).unwrap()
    }

    #[test]
    fn fig1_seed_is_identity() {
        assert_eq!(ev("- + x 8 8", 3.5), Some(3.5));
    }

    #[test]
    fn division_by_zero_is_undefined() {
        assert_eq!(ev("/ 1 x", 0.0), None);
        assert_eq!(ev("csc x", 0.0), None);
        assert_eq!(ev("ln x", -1.0), None);
        assert_eq!(ev("sqrt x", -1.0), None);
        assert_eq!(ev("asin x", 2.0), None);
        assert_eq!(ev("acosh x", 0.5), None);
    }

    #[test]
    fn derivative_matches_analytic() {
        let e = Expr::parse("d/dx pow x 2").unwrap();
        let a = Assignment::x(2.0f64).with_step(1e-5);
        let v = evaluate(&e, &a).unwrap().unwrap();
        assert!((v - 4.0).abs() < 1e-6, "{v}");
        // Analytic 1/(1+x^2) for atan.
        let v = ev("d/dx atan x", 0.5).unwrap();
        assert!((v - 0.8).abs() < 1e-8);
    }

    #[test]
    fn magnitude_guard() {
        assert_eq!(ev("pow x 20", 10.0), None);
        assert!(ev("pow x 11", 10.0).is_some());
        assert_eq!(ev("tan x", std::f64::consts::FRAC_PI_2), None);
    }

    #[test]
    fn unbound_variable() {
        let e = Expr::parse("+ x 1").unwrap();
        let err = evaluate(&e, &Assignment::<f64>::default()).unwrap_err();
        assert_eq!(err, EvalError::UnboundVariable("x".into()));
        let bad = Assignment::x(1.0).with_step(0.0);
        assert_eq!(evaluate(&e, &bad), Err(EvalError::NonPositiveStep));
    }

    #[test]
    fn reciprocal_conventions() {
        let x = 0.7_f64;
        let close = |a: Option<f64>, b: f64| (a.unwrap() - b).abs() < 1e-12;
        assert!(close(ev("acot x", -x), (1.0 / -x).atan()));
        assert!(close(ev("asech x", x), (1.0 / x).acosh()));
        assert!(close(ev("acoth x", 1.0 / x), x.atanh()));
        assert!(close(ev("pow e x", x), x.exp()));
    }

    #[test]
    fn generic_over_f32() {
        let e = Expr::parse("* 2 sin x").unwrap();
        let v: f32 = evaluate(&e, &Assignment::x(1.0f32)).unwrap().unwrap();
        assert!((v - 2.0 * 1.0f32.sin()).abs() < 1e-6);
    }

    #[test]
    fn deterministic() {
        let e = Expr::parse("d/dx * sin x ln x").unwrap();
        let a = Assignment::x(1.3);
        assert_eq!(evaluate(&e, &a), evaluate(&e, &a));
    }
}
