//! Context-free grammar view of a saturated e-graph, and bounded
//! enumeration of the terms it derives.
//!
//! Each reachable e-class becomes a nonterminal and each of its e-nodes one
//! production. Enumeration yields prefix token sequences shortest first,
//! then lexicographically by token, pruning with the cheapest completion
//! size of every nonterminal so cyclic grammars terminate.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt::{self, Write as _};
use std::rc::Rc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::egraph::{EGraph, Id};
use crate::expr::{Expr, Symbol};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Production {
    pub sym: Symbol,
    pub children: Vec<Id>,
}

impl fmt::Display for Production {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.sym)?;
        for c in &self.children {
            write!(f, " {c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar {
    root: Id,
    productions: BTreeMap<Id, Vec<Production>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("e-class {0} has no e-nodes")]
    EmptyClass(Id),
}

/// One nonterminal per e-class reachable from `root`, one production per
/// e-node. Productions are ordered leaves first, then by symbol token, then
/// by child ids.
pub fn extract_grammar(g: &EGraph, root: Id) -> Result<Grammar, GrammarError> {
    debug_assert!(!g.is_dirty(), "extract_grammar on a dirty e-graph");
    let root = g.find(root);
    let mut productions = BTreeMap::new();
    let mut queue = VecDeque::from([root]);
    while let Some(id) = queue.pop_front() {
        if productions.contains_key(&id) {
            continue;
        }
        let nodes = g.nodes(id);
        if nodes.is_empty() {
            return Err(GrammarError::EmptyClass(id));
        }
        let mut prods: Vec<Production> = nodes
            .iter()
            .map(|n| Production {
                sym: n.sym.clone(),
                children: n.children.iter().map(|&c| g.find(c)).collect(),
            })
            .collect();
        prods.sort_by(|a, b| {
            (!a.children.is_empty(), a.sym.token(), &a.children).cmp(&(
                !b.children.is_empty(),
                b.sym.token(),
                &b.children,
            ))
        });
        for p in &prods {
            for &c in &p.children {
                if !productions.contains_key(&c) {
                    queue.push_back(c);
                }
            }
        }
        productions.insert(id, prods);
    }
    Ok(Grammar { root, productions })
}

impl Grammar {
    pub fn root(&self) -> Id {
        self.root
    }

    pub fn productions(&self, id: Id) -> &[Production] {
        self.productions.get(&id).map_or(&[], Vec::as_slice)
    }

    pub fn nonterminals(&self) -> impl Iterator<Item = Id> + '_ {
        self.productions.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.productions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.productions.is_empty()
    }

    pub fn production_count(&self) -> usize {
        self.productions.values().map(Vec::len).sum()
    }

    /// `e<k> -> prod | prod | ...`, one nonterminal per line in id order.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (id, prods) in &self.productions {
            let alts: Vec<String> = prods.iter().map(Production::to_string).collect();
            let _ = writeln!(out, "{id} -> {}", alts.join(" | "));
        }
        out
    }

    /// Fewest tokens in any complete derivation from each nonterminal;
    /// `usize::MAX` for nonterminals with no finite derivation.
    pub fn min_sizes(&self) -> HashMap<Id, usize> {
        let mut best: HashMap<Id, usize> = self.nonterminals().map(|id| (id, usize::MAX)).collect();
        loop {
            let mut changed = false;
            for (id, prods) in &self.productions {
                for p in prods {
                    let size = p.children.iter().try_fold(1usize, |acc, c| match best[c] {
                        usize::MAX => None,
                        s => Some(acc + s),
                    });
                    if let Some(size) = size {
                        let slot = best.get_mut(id).expect("nonterminal");
                        if size < *slot {
                            *slot = size;
                            changed = true;
                        }
                    }
                }
            }
            if !changed {
                return best;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationLimits {
    pub token_limit: usize,
    #[serde(rename = "time_budget_ms", with = "crate::serde_millis")]
    pub time_budget: Duration,
    /// `usize::MAX` disables the cap.
    pub max_rewrites: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        EnumerationLimits {
            token_limit: 25,
            time_budget: Duration::from_secs(600),
            max_rewrites: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Enumeration {
    pub rewrites: Vec<Expr>,
    pub timed_out: bool,
}

type Seqs = Rc<Vec<Box<[u32]>>>;

struct Enumerator<'g> {
    grammar: &'g Grammar,
    min: HashMap<Id, usize>,
    /// Symbol ranks: comparing rank sequences orders by token string.
    rank: HashMap<&'g Symbol, u32>,
    symbols: Vec<&'g Symbol>,
    k: usize,
    memo: HashMap<(Id, usize), Seqs>,
    deadline: Instant,
    timed_out: bool,
}

impl<'g> Enumerator<'g> {
    fn new(grammar: &'g Grammar, k: usize, deadline: Instant) -> Self {
        let mut symbols: Vec<&Symbol> = grammar.productions.values().flatten().map(|p| &p.sym).collect();
        symbols.sort_by(|a, b| a.token().cmp(&b.token()).then_with(|| a.cmp(b)));
        symbols.dedup();
        let rank = symbols.iter().enumerate().map(|(i, s)| (*s, i as u32)).collect();
        Enumerator {
            grammar,
            min: grammar.min_sizes(),
            rank,
            symbols,
            k,
            memo: HashMap::new(),
            deadline,
            timed_out: false,
        }
    }

    /// The `k` smallest distinct sequences of exactly `size` tokens derivable
    /// from `class`.
    fn gen(&mut self, class: Id, size: usize) -> Seqs {
        if size < self.min[&class] {
            return Rc::default();
        }
        if let Some(hit) = self.memo.get(&(class, size)) {
            return hit.clone();
        }
        if self.timed_out || Instant::now() > self.deadline {
            self.timed_out = true;
            return Rc::default();
        }
        let mut out: Vec<Box<[u32]>> = Vec::new();
        let grammar = self.grammar;
        for p in grammar.productions(class) {
            let r = self.rank[&p.sym];
            match p.children.as_slice() {
                [] => {
                    if size == 1 {
                        out.push(Box::new([r]));
                    }
                }
                [c] => {
                    for t in self.gen(*c, size - 1).iter().take(self.k) {
                        out.push(prepend(r, &[t]));
                    }
                }
                [a, b] => {
                    let (ma, mb) = (self.min[a], self.min[b]);
                    if ma == usize::MAX || mb == usize::MAX || ma + mb + 1 > size {
                        continue;
                    }
                    for sa in ma..=size - 1 - mb {
                        let left = self.gen(*a, sa);
                        if left.is_empty() {
                            continue;
                        }
                        let right = self.gen(*b, size - 1 - sa);
                        let mut taken = 0;
                        'pairs: for l in left.iter() {
                            for rr in right.iter() {
                                if taken == self.k {
                                    break 'pairs;
                                }
                                out.push(prepend(r, &[l, rr]));
                                taken += 1;
                            }
                        }
                    }
                }
                _ => unreachable!("operators have arity at most 2"),
            }
        }
        out.sort_unstable();
        out.dedup();
        out.truncate(self.k);
        let seqs = Rc::new(out);
        if !self.timed_out {
            self.memo.insert((class, size), seqs.clone());
        }
        seqs
    }

    fn to_expr(&self, seq: &[u32]) -> Expr {
        fn build(syms: &[&Symbol], seq: &[u32], pos: &mut usize) -> Expr {
            let sym = syms[seq[*pos] as usize];
            *pos += 1;
            match sym {
                Symbol::Op(op) => Expr::Op(*op, (0..op.arity()).map(|_| build(syms, seq, pos)).collect()),
                leaf => Expr::leaf(leaf.clone()),
            }
        }
        let mut pos = 0;
        let e = build(&self.symbols, seq, &mut pos);
        debug_assert_eq!(pos, seq.len());
        e
    }
}

fn prepend(head: u32, parts: &[&[u32]]) -> Box<[u32]> {
    let mut v = Vec::with_capacity(1 + parts.iter().map(|p| p.len()).sum::<usize>());
    v.push(head);
    for p in parts {
        v.extend_from_slice(p);
    }
    v.into_boxed_slice()
}

/// Terms derivable from the root within `token_limit` tokens, shortest first
/// then lexicographic by token, truncated at `max_rewrites` or when the time
/// budget runs out.
pub fn enumerate_rewrites(gr: &Grammar, lim: &EnumerationLimits) -> Enumeration {
    let deadline = Instant::now()
        .checked_add(lim.time_budget)
        .unwrap_or_else(|| Instant::now() + Duration::from_secs(86_400 * 365));
    let mut en = Enumerator::new(gr, lim.max_rewrites, deadline);
    let mut rewrites = Vec::new();
    if gr.is_empty() {
        return Enumeration {
            rewrites,
            timed_out: false,
        };
    }
    for size in 1..=lim.token_limit {
        if rewrites.len() >= lim.max_rewrites || en.timed_out {
            break;
        }
        let seqs = en.gen(gr.root, size);
        let room = lim.max_rewrites - rewrites.len();
        rewrites.extend(seqs.iter().take(room).map(|s| en.to_expr(s)));
    }
    Enumeration {
        rewrites,
        timed_out: en.timed_out,
    }
}
