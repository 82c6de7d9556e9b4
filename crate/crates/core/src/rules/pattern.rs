use std::fmt;

use crate::expr::sexp::{self, SExp};
use crate::expr::{Expr, Op, ParseError, Symbol, Vocabulary};

/// A pattern variable such as `?x`. Patterns refer to variables by index into
/// the variable table shared by a rule's two sides.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PatVar(pub u16);

/// An expression tree whose leaves may also be pattern variables.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum PatNode {
    Var(PatVar),
    Node(Symbol, Vec<PatNode>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pattern {
    pub(crate) root: PatNode,
    /// Names of the variables, indexed by `PatVar`.
    pub(crate) names: Vec<String>,
}

/// Variable-name table used while parsing the sides of one rule.
#[derive(Debug, Default)]
pub(crate) struct VarTable {
    pub names: Vec<String>,
    pub frozen: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PatternError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("right-hand side uses `{0}`, which the left-hand side does not bind")]
    UnboundRhsVariable(String),
}

impl VarTable {
    fn intern(&mut self, name: &str) -> Result<PatVar, PatternError> {
        if let Some(i) = self.names.iter().position(|n| n == name) {
            return Ok(PatVar(i as u16));
        }
        if self.frozen {
            return Err(PatternError::UnboundRhsVariable(name.to_string()));
        }
        self.names.push(name.to_string());
        Ok(PatVar((self.names.len() - 1) as u16))
    }
}

impl Pattern {
    /// Parses a standalone pattern (its own variable table).
    pub fn parse(src: &str) -> Result<Pattern, PatternError> {
        let mut table = VarTable::default();
        let root = parse_node(src, &Vocabulary::default(), &mut table)?;
        Ok(Pattern {
            root,
            names: table.names,
        })
    }

    pub(crate) fn parse_with(src: &str, vocab: &Vocabulary, table: &mut VarTable) -> Result<PatNode, PatternError> {
        parse_node(src, vocab, table)
    }

    pub fn var_count(&self) -> usize {
        self.names.len()
    }

    pub fn var_names(&self) -> &[String] {
        &self.names
    }

    pub fn var_index(&self, name: &str) -> Option<PatVar> {
        self.names.iter().position(|n| n == name).map(|i| PatVar(i as u16))
    }

    pub fn root(&self) -> &PatNode {
        &self.root
    }

    /// Builds an expression by substituting `bindings[i]` for variable `i`.
    pub fn instantiate(&self, bindings: &[Expr]) -> Expr {
        self.root.instantiate(bindings)
    }

    /// Matches against a concrete expression tree, returning the bindings.
    pub fn match_expr(&self, e: &Expr) -> Option<Vec<Expr>> {
        let mut slots: Vec<Option<&Expr>> = vec![None; self.names.len()];
        if self.root.match_expr(e, &mut slots) {
            Some(slots.into_iter().map(|s| s.cloned().expect("all vars bound")).collect())
        } else {
            None
        }
    }
}

fn parse_node(src: &str, vocab: &Vocabulary, table: &mut VarTable) -> Result<PatNode, PatternError> {
    let s = sexp::read(src)?;
    from_sexp(&s, vocab, table)
}

fn from_sexp(s: &SExp<'_>, vocab: &Vocabulary, table: &mut VarTable) -> Result<PatNode, PatternError> {
    match s {
        SExp::Atom(tok, _) if tok.starts_with('?') && tok.len() > 1 => Ok(PatNode::Var(table.intern(tok)?)),
        SExp::Atom(tok, off) => match vocab.symbol(tok, *off)? {
            Symbol::Op(op) => Err(ParseError::BareOperator(op.token().into()).into()),
            leaf => Ok(PatNode::Node(leaf, Vec::new())),
        },
        SExp::List(items, off) => {
            let Some((SExp::Atom(head, hoff), rest)) = items.split_first() else {
                return Err(ParseError::UnknownToken {
                    token: "(".into(),
                    position: *off,
                }
                .into());
            };
            let op = match vocab.symbol(head, *hoff)? {
                Symbol::Op(op) => op,
                _ => {
                    return Err(ParseError::UnknownToken {
                        token: head.to_string(),
                        position: *hoff,
                    }
                    .into())
                }
            };
            if rest.len() != op.arity() {
                return Err(ParseError::ArityMismatch {
                    op: op.token().into(),
                    expected: op.arity(),
                    found: rest.len(),
                }
                .into());
            }
            let kids = rest
                .iter()
                .map(|c| from_sexp(c, vocab, table))
                .collect::<Result<_, _>>()?;
            Ok(PatNode::Node(Symbol::Op(op), kids))
        }
    }
}

impl PatNode {
    pub fn instantiate(&self, bindings: &[Expr]) -> Expr {
        match self {
            PatNode::Var(v) => bindings[v.0 as usize].clone(),
            PatNode::Node(Symbol::Op(op), kids) => {
                Expr::Op(*op, kids.iter().map(|k| k.instantiate(bindings)).collect())
            }
            PatNode::Node(leaf, _) => Expr::leaf(leaf.clone()),
        }
    }

    fn match_expr<'e>(&self, e: &'e Expr, slots: &mut [Option<&'e Expr>]) -> bool {
        match self {
            PatNode::Var(v) => match slots[v.0 as usize] {
                Some(bound) => bound == e,
                None => {
                    slots[v.0 as usize] = Some(e);
                    true
                }
            },
            PatNode::Node(sym, kids) => {
                if *sym != e.symbol() {
                    return false;
                }
                // Roll back bindings made by a failed partial match.
                let saved: Vec<Option<&Expr>> = slots.to_vec();
                let ok = kids.iter().zip(e.children()).all(|(k, c)| k.match_expr(c, slots));
                if !ok {
                    slots.copy_from_slice(&saved);
                }
                ok
            }
        }
    }

    pub fn vars(&self, out: &mut Vec<PatVar>) {
        match self {
            PatNode::Var(v) => {
                if !out.contains(v) {
                    out.push(*v);
                }
            }
            PatNode::Node(_, kids) => kids.iter().for_each(|k| k.vars(out)),
        }
    }

    pub fn top_symbol(&self) -> Option<&Symbol> {
        match self {
            PatNode::Var(_) => None,
            PatNode::Node(s, _) => Some(s),
        }
    }

    pub fn size(&self) -> usize {
        match self {
            PatNode::Var(_) => 1,
            PatNode::Node(_, kids) => 1 + kids.iter().map(PatNode::size).sum::<usize>(),
        }
    }

    pub fn contains_op(&self, op: Op) -> bool {
        match self {
            PatNode::Var(_) => false,
            PatNode::Node(s, kids) => *s == Symbol::Op(op) || kids.iter().any(|k| k.contains_op(op)),
        }
    }

    pub(crate) fn write_sexpr(&self, names: &[String], f: &mut impl fmt::Write) -> fmt::Result {
        match self {
            PatNode::Var(v) => f.write_str(&names[v.0 as usize]),
            PatNode::Node(sym, kids) if kids.is_empty() => write!(f, "{sym}"),
            PatNode::Node(sym, kids) => {
                write!(f, "({sym}")?;
                for k in kids {
                    f.write_char(' ')?;
                    k.write_sexpr(names, f)?;
                }
                f.write_char(')')
            }
        }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.write_sexpr(&self.names, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_prints() {
        let p = Pattern::parse("(- (+ ?x ?y) ?z)").unwrap();
        assert_eq!(p.var_count(), 3);
        assert_eq!(p.to_string(), "(- (+ ?x ?y) ?z)");
        let q = Pattern::parse("(- ?a ?a)").unwrap();
        assert_eq!(q.var_count(), 1);
        assert_eq!(Pattern::parse("0").unwrap().to_string(), "0");
    }

    #[test]
    fn nonlinear_tree_match() {
        let p = Pattern::parse("(- ?a ?a)").unwrap();
        let hit = Expr::parse("- + x 1 + x 1").unwrap();
        let miss = Expr::parse("- + x 1 + 1 x").unwrap();
        assert_eq!(p.match_expr(&hit).unwrap(), vec![Expr::parse("+ x 1").unwrap()]);
        assert!(p.match_expr(&miss).is_none());
    }

    #[test]
    fn instantiate_substitutes() {
        let p = Pattern::parse("(+ ?x (- ?y ?z))").unwrap();
        let e = p.instantiate(&[Expr::var("x"), Expr::Int(8), Expr::Int(8)]);
        assert_eq!(e.to_prefix(), "+ x - 8 8");
    }
}
