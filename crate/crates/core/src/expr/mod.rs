//! Expression trees over the operator vocabulary, with prefix and
//! s-expression parsing, numeric evaluation, and single-node mutation.
//!
//! The canonical textual form is prefix notation: tokens separated by single
//! spaces, e.g. `- + x 8 8` for `(x + 8) - 8`. Prefix is unambiguous because
//! every operator has a fixed arity.

mod eval;
mod mutate;
mod ops;
pub mod oracle;
pub(crate) mod sexp;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

pub(crate) use eval::{binary, unary};
pub use eval::{evaluate, Assignment, EvalConfig, EvalError};
pub(crate) use mutate::mutate_any;
pub use mutate::{mutate, mutation_sites, MutationError, MutationMode, MutationOptions};
pub use ops::{Category, Op, COVERAGE_OPERATOR_COUNT};

/// A variable name. Cheap to clone.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: &str) -> Self {
        Var(Arc::from(name))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Named real constants usable as leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Constant {
    Pi,
    E,
}

impl Constant {
    pub fn token(self) -> &'static str {
        match self {
            Constant::Pi => "pi",
            Constant::E => "e",
        }
    }

    pub fn from_token(tok: &str) -> Option<Constant> {
        match tok {
            "pi" => Some(Constant::Pi),
            "e" => Some(Constant::E),
            _ => None,
        }
    }
}

/// The head symbol of a node: an operator or a leaf.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Symbol {
    Op(Op),
    Var(Var),
    Int(i64),
    Const(Constant),
}

impl Symbol {
    pub fn arity(&self) -> usize {
        match self {
            Symbol::Op(op) => op.arity(),
            _ => 0,
        }
    }

    pub fn is_leaf(&self) -> bool {
        !matches!(self, Symbol::Op(_))
    }

    pub fn token(&self) -> Cow<'_, str> {
        match self {
            Symbol::Op(op) => Cow::Borrowed(op.token()),
            Symbol::Var(v) => Cow::Borrowed(v.as_str()),
            Symbol::Int(n) => Cow::Owned(n.to_string()),
            Symbol::Const(c) => Cow::Borrowed(c.token()),
        }
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

/// An expression tree. Every `Op` node carries exactly `op.arity()` children.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Expr {
    Var(Var),
    Int(i64),
    Const(Constant),
    Op(Op, Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("empty input")]
    Empty,
    #[error("unknown token `{token}` at position {position}")]
    UnknownToken { token: String, position: usize },
    #[error("operator `{op}` at position {position} is missing operands")]
    ArityUnderflow { op: String, position: usize },
    #[error("trailing tokens starting at position {position}")]
    TrailingTokens { position: usize },
    #[error("unbalanced parentheses")]
    UnbalancedParens,
    #[error("operator `{op}` expects {expected} operands, found {found}")]
    ArityMismatch { op: String, expected: usize, found: usize },
    #[error("operator `{0}` used as a leaf")]
    BareOperator(String),
}

/// Declared variable names; any other identifier is rejected by the parsers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    variables: Vec<Var>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary {
            variables: vec![Var::new("x")],
        }
    }
}

impl Vocabulary {
    pub fn new<'a>(vars: impl IntoIterator<Item = &'a str>) -> Self {
        Vocabulary {
            variables: vars.into_iter().map(Var::new).collect(),
        }
    }

    pub fn variables(&self) -> &[Var] {
        &self.variables
    }

    /// The variable that `d/dx` differentiates with respect to.
    pub fn primary(&self) -> &Var {
        &self.variables[0]
    }

    pub fn var(&self, name: &str) -> Option<&Var> {
        self.variables.iter().find(|v| v.as_str() == name)
    }

    /// Classifies a single non-parenthesis token.
    pub fn symbol(&self, tok: &str, position: usize) -> Result<Symbol, ParseError> {
        if let Some(op) = Op::from_token(tok) {
            return Ok(Symbol::Op(op));
        }
        if let Some(n) = parse_int(tok) {
            return Ok(Symbol::Int(n));
        }
        if let Some(c) = Constant::from_token(tok) {
            return Ok(Symbol::Const(c));
        }
        if let Some(v) = self.var(tok) {
            return Ok(Symbol::Var(v.clone()));
        }
        Err(ParseError::UnknownToken {
            token: tok.to_string(),
            position,
        })
    }

    /// Parses prefix tokens or, when the input starts with `(`, an s-expression.
    pub fn parse(&self, src: &str) -> Result<Expr, ParseError> {
        if src.trim_start().starts_with('(') {
            self.parse_sexpr(src)
        } else {
            let toks: Vec<&str> = src.split_whitespace().collect();
            self.parse_prefix(&toks)
        }
    }

    pub fn parse_prefix(&self, tokens: &[&str]) -> Result<Expr, ParseError> {
        if tokens.is_empty() {
            return Err(ParseError::Empty);
        }
        let mut pos = 0;
        let e = self.prefix_node(tokens, &mut pos)?;
        if pos != tokens.len() {
            return Err(ParseError::TrailingTokens { position: pos });
        }
        Ok(e)
    }

    fn prefix_node(&self, tokens: &[&str], pos: &mut usize) -> Result<Expr, ParseError> {
        let here = *pos;
        let tok = tokens[here];
        *pos += 1;
        match self.symbol(tok, here)? {
            Symbol::Op(op) => {
                let mut children = Vec::with_capacity(op.arity());
                for _ in 0..op.arity() {
                    if *pos >= tokens.len() {
                        return Err(ParseError::ArityUnderflow {
                            op: tok.to_string(),
                            position: here,
                        });
                    }
                    children.push(self.prefix_node(tokens, pos)?);
                }
                Ok(Expr::Op(op, children))
            }
            leaf => Ok(Expr::leaf(leaf)),
        }
    }

    pub fn parse_sexpr(&self, src: &str) -> Result<Expr, ParseError> {
        let s = sexp::read(src)?;
        self.expr_from_sexp(&s)
    }

    fn expr_from_sexp(&self, s: &sexp::SExp<'_>) -> Result<Expr, ParseError> {
        use sexp::SExp;
        match s {
            SExp::Atom(tok, off) => match self.symbol(tok, *off)? {
                Symbol::Op(op) => Err(ParseError::BareOperator(op.token().to_string())),
                leaf => Ok(Expr::leaf(leaf)),
            },
            SExp::List(items, off) => {
                let Some((SExp::Atom(head, hoff), rest)) = items.split_first() else {
                    return Err(ParseError::UnknownToken {
                        token: "(".into(),
                        position: *off,
                    });
                };
                let Symbol::Op(op) = self.symbol(head, *hoff)? else {
                    return Err(ParseError::UnknownToken {
                        token: head.to_string(),
                        position: *hoff,
                    });
                };
                if rest.len() != op.arity() {
                    return Err(ParseError::ArityMismatch {
                        op: op.token().into(),
                        expected: op.arity(),
                        found: rest.len(),
                    });
                }
                let children = rest.iter().map(|c| self.expr_from_sexp(c)).collect::<Result<_, _>>()?;
                Ok(Expr::Op(op, children))
            }
        }
    }
}

/// Integer literal: optional leading `-` followed by ASCII digits.
pub(crate) fn parse_int(tok: &str) -> Option<i64> {
    let digits = tok.strip_prefix('-').unwrap_or(tok);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    tok.parse().ok()
}

impl Expr {
    pub fn var(name: &str) -> Expr {
        Expr::Var(Var::new(name))
    }

    pub fn op(op: Op, children: Vec<Expr>) -> Expr {
        debug_assert_eq!(children.len(), op.arity());
        Expr::Op(op, children)
    }

    pub fn unary(op: Op, a: Expr) -> Expr {
        Expr::op(op, vec![a])
    }

    pub fn binary(op: Op, a: Expr, b: Expr) -> Expr {
        Expr::op(op, vec![a, b])
    }

    /// Builds a leaf from a leaf symbol. Panics on an operator symbol.
    pub fn leaf(sym: Symbol) -> Expr {
        match sym {
            Symbol::Var(v) => Expr::Var(v),
            Symbol::Int(n) => Expr::Int(n),
            Symbol::Const(c) => Expr::Const(c),
            Symbol::Op(op) => panic!("`{op}` is not a leaf"),
        }
    }

    /// Parses with the default vocabulary (single variable `x`).
    pub fn parse(src: &str) -> Result<Expr, ParseError> {
        Vocabulary::default().parse(src)
    }

    pub fn symbol(&self) -> Symbol {
        match self {
            Expr::Var(v) => Symbol::Var(v.clone()),
            Expr::Int(n) => Symbol::Int(*n),
            Expr::Const(c) => Symbol::Const(*c),
            Expr::Op(op, _) => Symbol::Op(*op),
        }
    }

    pub fn children(&self) -> &[Expr] {
        match self {
            Expr::Op(_, c) => c,
            _ => &[],
        }
    }

    /// Pre-order token sequence.
    pub fn tokens(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.visit_preorder(&mut |e| out.push(e.symbol().token().into_owned()));
        out
    }

    pub fn token_count(&self) -> usize {
        1 + self.children().iter().map(Expr::token_count).sum::<usize>()
    }

    pub fn to_prefix(&self) -> String {
        self.to_string()
    }

    pub fn to_sexpr(&self) -> String {
        match self {
            Expr::Op(op, children) => {
                let mut s = format!("({op}");
                for c in children {
                    s.push(' ');
                    s.push_str(&c.to_sexpr());
                }
                s.push(')');
                s
            }
            leaf => leaf.symbol().to_string(),
        }
    }

    pub fn visit_preorder<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        for c in self.children() {
            c.visit_preorder(f);
        }
    }

    pub fn contains_op(&self, op: Op) -> bool {
        let mut found = false;
        self.visit_preorder(&mut |e| found |= matches!(e, Expr::Op(o, _) if *o == op));
        found
    }

    /// Number of nodes at which two trees differ, or `None` when their shapes
    /// differ (a symbol with a different arity at some position).
    pub fn node_diff(&self, other: &Expr) -> Option<usize> {
        let (a, b) = (self.children(), other.children());
        if a.len() != b.len() {
            return None;
        }
        let here = usize::from(self.symbol() != other.symbol());
        a.iter()
            .zip(b)
            .try_fold(here, |acc, (x, y)| Some(acc + x.node_diff(y)?))
    }

    /// Subterm at a pre-order index.
    pub fn subterm(&self, index: usize) -> Option<&Expr> {
        let mut i = 0;
        let mut found = None;
        self.visit_preorder(&mut |e| {
            if i == index {
                found = Some(e);
            }
            i += 1;
        });
        found
    }

    /// Returns a copy with the subterm at pre-order `index` replaced.
    pub fn replace_at(&self, index: usize, replacement: Expr) -> Expr {
        fn go(e: &Expr, target: usize, next: &mut usize, rep: &mut Option<Expr>) -> Expr {
            let here = *next;
            *next += 1;
            if here == target {
                // Skip the replaced subtree's indices.
                *next += e.token_count() - 1;
                return rep.take().expect("replacement used once");
            }
            match e {
                Expr::Op(op, children) => Expr::Op(*op, children.iter().map(|c| go(c, target, next, rep)).collect()),
                leaf => leaf.clone(),
            }
        }
        go(self, index, &mut 0, &mut Some(replacement))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        let mut result = Ok(());
        self.visit_preorder(&mut |e| {
            if result.is_err() {
                return;
            }
            if !first {
                result = f.write_str(" ");
            }
            first = false;
            if result.is_ok() {
                result = write!(f, "{}", e.symbol());
            }
        });
        result
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, ParseError> {
        Expr::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        Expr::parse(s).unwrap()
    }

    #[test]
    fn parses_fig1_seed() {
        let e = p("- + x 8 8");
        assert_eq!(
            e,
            Expr::binary(
                Op::Sub,
                Expr::binary(Op::Add, Expr::var("x"), Expr::Int(8)),
                Expr::Int(8)
            )
        );
        assert_eq!(e.to_prefix(), "- + x 8 8");
        assert_eq!(e.token_count(), 5);
        assert_eq!(p("(- (+ x 8) 8)"), e);
        assert_eq!(e.to_sexpr(), "(- (+ x 8) 8)");
    }

    #[test]
    fn single_leaf() {
        assert_eq!(p("x"), Expr::var("x"));
        assert_eq!(p("x").token_count(), 1);
        assert_eq!(p("-7"), Expr::Int(-7));
        assert_eq!(p("pi"), Expr::Const(Constant::Pi));
    }

    #[test]
    fn round_trips_printed_form() {
        let s = "+ sin x 1";
        let e = p(s);
        assert_eq!(
            e,
            Expr::binary(Op::Add, Expr::unary(Op::Sin, Expr::var("x")), Expr::Int(1))
        );
        assert_eq!(e.to_prefix(), s);
        assert_eq!(p(&e.to_prefix()), e);
    }

    #[test]
    fn table2_seed_token_count() {
        // tanh(3x - (-4)) - 6
        let e = p("(- (tanh (- (* 3 x) -4)) 6)");
        assert_eq!(e.to_prefix(), "- tanh - * 3 x -4 6");
        assert_eq!(e.token_count(), e.tokens().len());
        assert_eq!(e.token_count(), 8);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(Expr::parse("+ x"), Err(ParseError::ArityUnderflow { .. })));
        assert!(matches!(
            Expr::parse("x x"),
            Err(ParseError::TrailingTokens { position: 1 })
        ));
        assert!(matches!(
            Expr::parse("+ y 1"),
            Err(ParseError::UnknownToken { position: 1, .. })
        ));
        assert!(matches!(Expr::parse(""), Err(ParseError::Empty)));
        assert!(matches!(
            Expr::parse("(sin x 1)"),
            Err(ParseError::ArityMismatch { .. })
        ));
        assert!(matches!(Expr::parse("(+ x sin)"), Err(ParseError::BareOperator(_))));
        assert!(matches!(Expr::parse("- -"), Err(ParseError::ArityUnderflow { .. })));
    }

    #[test]
    fn custom_vocabulary() {
        let vocab = Vocabulary::new(["t", "u"]);
        assert!(vocab.parse("+ t u").is_ok());
        assert!(vocab.parse("+ x u").is_err());
        assert_eq!(vocab.primary().as_str(), "t");
    }

    #[test]
    fn replace_and_diff() {
        let e = p("+ sin x 1");
        let f = e.replace_at(1, p("cos x"));
        assert_eq!(f.to_prefix(), "+ cos x 1");
        assert_eq!(e.node_diff(&f), Some(1));
        assert_eq!(e.subterm(2), Some(&Expr::var("x")));
        let g = e.replace_at(3, Expr::Int(2));
        assert_eq!(g.to_prefix(), "+ sin x 2");
        assert_eq!(e.node_diff(&p("+ x 1")), None);
    }
}
