//! Seed templates: s-expressions whose leaves or operators may be
//! placeholders.
//!
//! - `{aop}`: a binary arithmetic operator (`+ - * /`)
//! - `{fop}`: a unary functional operator (everything unary but `d/dx`)
//! - `{fop:<category>}`: a unary operator of one category, e.g. `{fop:trig}`
//! - `{int}` / `{int:a..b}`: an integer literal (inclusive range)
//!
//! ```text
//! # Table-2 style shapes
//! (- ({fop:hyperbolic} (+ (* 3 x) 4)) {int:5..6})
//! ```

use std::collections::HashSet;
use std::ops::RangeInclusive;

use thiserror::Error;

use crate::expr::sexp::{self, SExp};
use crate::expr::{Category, Expr, Op, ParseError, Symbol, Vocabulary};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Node {
    Fixed(Symbol, Vec<Node>),
    OpSlot(Vec<Op>, Vec<Node>),
    IntSlot(RangeInclusive<i64>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    source: String,
    root: Node,
}

/// Default range for a bare `{int}`.
pub const DEFAULT_INT_RANGE: RangeInclusive<i64> = 1..=9;

impl Template {
    pub fn parse(src: &str) -> Result<Template, TemplateError> {
        Self::parse_at(src, 0, &Vocabulary::default(), &DEFAULT_INT_RANGE)
    }

    fn parse_at(
        src: &str,
        line: usize,
        vocab: &Vocabulary,
        ints: &RangeInclusive<i64>,
    ) -> Result<Template, TemplateError> {
        let err = |msg: String| TemplateError::Syntax { line, msg };
        let s = sexp::read(src).map_err(|e| err(e.to_string()))?;
        let root = build(&s, vocab, ints).map_err(err)?;
        Ok(Template {
            source: src.trim().to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Number of expressions the full Cartesian expansion would produce.
    pub fn expansion_size(&self) -> u128 {
        fn size(n: &Node) -> u128 {
            match n {
                Node::Fixed(_, kids) => kids.iter().map(size).product(),
                Node::OpSlot(ops, kids) => ops.len() as u128 * kids.iter().map(size).product::<u128>(),
                Node::IntSlot(r) => (r.end() - r.start() + 1).max(0) as u128,
            }
        }
        size(&self.root)
    }

    /// Expansion in odometer order: the first placeholder (pre-order) varies
    /// slowest.
    pub fn expand(&self) -> impl Iterator<Item = Expr> + '_ {
        let mut slots = Vec::new();
        collect_slots(&self.root, &mut slots);
        let radices: Vec<usize> = slots.iter().map(|s| s.len()).collect();
        let empty = radices.contains(&0);
        let mut counter = vec![0usize; radices.len()];
        let mut done = empty;
        std::iter::from_fn(move || {
            if done {
                return None;
            }
            let mut pos = 0;
            let e = instantiate(&self.root, &counter, &mut pos);
            done = !advance(&mut counter, &radices);
            Some(e)
        })
    }
}

enum Slot<'a> {
    Ops(&'a [Op]),
    Ints(RangeInclusive<i64>),
}

impl Slot<'_> {
    fn len(&self) -> usize {
        match self {
            Slot::Ops(o) => o.len(),
            Slot::Ints(r) => (r.end() - r.start() + 1).max(0) as usize,
        }
    }
}

fn collect_slots<'a>(n: &'a Node, out: &mut Vec<Slot<'a>>) {
    match n {
        Node::Fixed(_, kids) => kids.iter().for_each(|k| collect_slots(k, out)),
        Node::OpSlot(ops, kids) => {
            out.push(Slot::Ops(ops));
            kids.iter().for_each(|k| collect_slots(k, out));
        }
        Node::IntSlot(r) => out.push(Slot::Ints(r.clone())),
    }
}

fn instantiate(n: &Node, counter: &[usize], pos: &mut usize) -> Expr {
    match n {
        Node::Fixed(Symbol::Op(op), kids) => Expr::Op(*op, kids.iter().map(|k| instantiate(k, counter, pos)).collect()),
        Node::Fixed(leaf, _) => Expr::leaf(leaf.clone()),
        Node::OpSlot(ops, kids) => {
            let op = ops[counter[*pos]];
            *pos += 1;
            Expr::Op(op, kids.iter().map(|k| instantiate(k, counter, pos)).collect())
        }
        Node::IntSlot(r) => {
            let v = r.start() + counter[*pos] as i64;
            *pos += 1;
            Expr::Int(v)
        }
    }
}

fn advance(counter: &mut [usize], radices: &[usize]) -> bool {
    for i in (0..counter.len()).rev() {
        counter[i] += 1;
        if counter[i] < radices[i] {
            return true;
        }
        counter[i] = 0;
    }
    false
}

fn placeholder(tok: &str) -> Option<&str> {
    tok.strip_prefix('{')?.strip_suffix('}')
}

fn op_domain(spec: &str) -> Result<Vec<Op>, String> {
    match spec.split_once(':') {
        None if spec == "aop" => Ok(Op::binary_arith().collect()),
        None if spec == "fop" => Ok(Op::unary_functions().collect()),
        Some(("fop", cat)) => {
            let cat: Category = cat.parse().map_err(|()| format!("unknown category `{cat}`"))?;
            let ops: Vec<Op> = Op::in_category(cat).filter(|o| o.arity() == 1).collect();
            if ops.is_empty() {
                return Err(format!("category `{cat:?}` has no unary operators"));
            }
            Ok(ops)
        }
        _ => Err(format!("unknown placeholder `{{{spec}}}`")),
    }
}

fn int_domain(spec: &str, default: &RangeInclusive<i64>) -> Option<Result<RangeInclusive<i64>, String>> {
    if spec == "int" {
        return Some(Ok(default.clone()));
    }
    let range = spec.strip_prefix("int:")?;
    let parsed = range.split_once("..").and_then(|(a, b)| {
        let a = crate::expr::parse_int(a.trim())?;
        let b = crate::expr::parse_int(b.trim().trim_start_matches('='))?;
        Some(a..=b)
    });
    Some(match parsed {
        Some(r) if r.start() <= r.end() => Ok(r),
        Some(_) => Err(format!("empty range in `{{{spec}}}`")),
        None => Err(format!("malformed range in `{{{spec}}}`")),
    })
}

fn build(s: &SExp<'_>, vocab: &Vocabulary, ints: &RangeInclusive<i64>) -> Result<Node, String> {
    match s {
        SExp::Atom(tok, off) => match placeholder(tok) {
            Some(spec) => match int_domain(spec, ints) {
                Some(r) => r.map(Node::IntSlot),
                None => Err(format!("operator placeholder `{tok}` used as a leaf")),
            },
            None => match vocab.symbol(tok, *off).map_err(|e| e.to_string())? {
                Symbol::Op(op) => Err(ParseError::BareOperator(op.token().into()).to_string()),
                leaf => Ok(Node::Fixed(leaf, Vec::new())),
            },
        },
        SExp::List(items, _) => {
            let Some((SExp::Atom(head, hoff), rest)) = items.split_first() else {
                return Err("list must start with an operator".into());
            };
            let kids = rest
                .iter()
                .map(|c| build(c, vocab, ints))
                .collect::<Result<Vec<_>, _>>()?;
            let (node, arity, name) = match placeholder(head) {
                Some(spec) => {
                    let ops = op_domain(spec)?;
                    let arity = ops[0].arity();
                    (Node::OpSlot(ops, Vec::new()), arity, head.to_string())
                }
                None => match vocab.symbol(head, *hoff).map_err(|e| e.to_string())? {
                    Symbol::Op(op) => (
                        Node::Fixed(Symbol::Op(op), Vec::new()),
                        op.arity(),
                        op.token().to_string(),
                    ),
                    _ => return Err(format!("`{head}` is not an operator")),
                },
            };
            if kids.len() != arity {
                return Err(format!("`{name}` takes {arity} operand(s), found {}", kids.len()));
            }
            Ok(match node {
                Node::OpSlot(ops, _) => Node::OpSlot(ops, kids),
                Node::Fixed(sym, _) => Node::Fixed(sym, kids),
                Node::IntSlot(_) => unreachable!(),
            })
        }
    }
}

/// Parses a template file: one template per line, `#` comments.
pub fn parse_templates(text: &str) -> Result<Vec<Template>, TemplateError> {
    parse_templates_with(text, &DEFAULT_INT_RANGE)
}

/// As [`parse_templates`], with a custom range for bare `{int}`.
pub fn parse_templates_with(text: &str, ints: &RangeInclusive<i64>) -> Result<Vec<Template>, TemplateError> {
    let vocab = Vocabulary::default();
    text.lines()
        .enumerate()
        .filter_map(|(i, raw)| {
            let body = raw.split_once('#').map_or(raw, |(b, _)| b).trim();
            (!body.is_empty()).then(|| Template::parse_at(body, i + 1, &vocab, ints))
        })
        .collect()
}

/// Expands every template in order, dropping duplicates; each template
/// contributes at most `cap` new expressions.
pub fn instantiate_templates(templates: &[Template], cap: usize) -> Vec<Expr> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for t in templates {
        let mut taken = 0;
        for e in t.expand() {
            if taken == cap {
                break;
            }
            if seen.insert(e.to_prefix()) {
                out.push(e);
                taken += 1;
            }
        }
    }
    out
}

pub const DESK_TEMPLATES: &str = include_str!("../../data/desk.templates");

pub fn desk_templates() -> Vec<Template> {
    parse_templates(DESK_TEMPLATES).expect("shipped templates parse")
}
