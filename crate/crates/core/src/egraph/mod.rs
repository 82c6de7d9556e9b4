//! E-graph: e-classes of equivalent e-nodes over a union-find, kept
//! hash-consed and congruence-closed by [`EGraph::rebuild`].
//!
//! Mutations (`add`, `union`) leave the graph *dirty*; matching requires a
//! rebuilt graph. Ids handed out are canonicalized on read, and raw ids are
//! only meaningful up to [`EGraph::find`].

mod analysis;
mod ematch;
mod saturate;
mod unionfind;

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use smallvec::SmallVec;
use thiserror::Error;

use crate::expr::{Expr, Symbol};
use crate::rules::{PatNode, Pattern};

pub use ematch::Subst;
pub use saturate::{saturate, SaturationLimits, SaturationReport, StopReason};
pub use unionfind::UnionFind;

/// Opaque e-class id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Id(pub(crate) u32);

impl Id {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ENode {
    pub sym: Symbol,
    pub children: SmallVec<[Id; 2]>,
}

impl ENode {
    pub fn leaf(sym: Symbol) -> Self {
        ENode {
            sym,
            children: SmallVec::new(),
        }
    }

    fn canonicalize(&mut self, uf: &UnionFind) {
        for c in self.children.iter_mut() {
            *c = uf.find(*c);
        }
    }
}

impl fmt::Display for ENode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.sym)?;
        if !self.children.is_empty() {
            f.write_char('(')?;
            for (i, c) in self.children.iter().enumerate() {
                if i > 0 {
                    f.write_char(',')?;
                }
                write!(f, "{c}")?;
            }
            f.write_char(')')?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct EClass {
    nodes: Vec<ENode>,
    parents: Vec<(ENode, Id)>,
    data: analysis::Values,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EGraphError {
    #[error("e-node limit of {0} exceeded")]
    NodeLimitExceeded(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("e-graph audit failed: {0}")]
pub struct AuditError(pub String);

#[derive(Debug, Clone)]
pub struct EGraph {
    uf: UnionFind,
    classes: Vec<Option<EClass>>,
    memo: HashMap<ENode, Id>,
    pending: Vec<(ENode, Id)>,
    // Classes whose numeric data grew; their parents need recomputing.
    analysis_pending: Vec<Id>,
    node_limit: usize,
    // Change counters; saturation compares them across an iteration.
    adds: usize,
    merges: usize,
}

impl Default for EGraph {
    fn default() -> Self {
        EGraph::new()
    }
}

impl EGraph {
    pub fn new() -> Self {
        EGraph {
            uf: UnionFind::default(),
            classes: Vec::new(),
            memo: HashMap::new(),
            pending: Vec::new(),
            analysis_pending: Vec::new(),
            node_limit: usize::MAX,
            adds: 0,
            merges: 0,
        }
    }

    /// Caps the e-node count enforced by [`EGraph::add_expr`].
    pub fn with_node_limit(mut self, limit: usize) -> Self {
        self.node_limit = limit;
        self
    }

    pub fn find(&self, id: Id) -> Id {
        self.uf.find(id)
    }

    /// E-nodes currently hash-consed. Exact after `rebuild`.
    pub fn node_count(&self) -> usize {
        self.memo.len()
    }

    pub fn class_count(&self) -> usize {
        self.classes.iter().filter(|c| c.is_some()).count()
    }

    pub fn is_dirty(&self) -> bool {
        !self.pending.is_empty()
    }

    pub(crate) fn change_counters(&self) -> (usize, usize) {
        (self.adds, self.merges)
    }

    /// Canonical class ids in ascending order.
    pub fn class_ids(&self) -> impl Iterator<Item = Id> + '_ {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_some())
            .map(|(i, _)| Id(i as u32))
    }

    /// E-nodes of the class containing `id`.
    pub fn nodes(&self, id: Id) -> &[ENode] {
        let id = self.find(id);
        &self.classes[id.index()]
            .as_ref()
            .expect("canonical id has a class")
            .nodes
    }

    /// Hash-conses one e-node; returns its class.
    pub fn add(&mut self, mut node: ENode) -> Id {
        node.canonicalize(&self.uf);
        if let Some(&id) = self.memo.get(&node) {
            return self.find(id);
        }
        let id = self.uf.make_set();
        let data = {
            let kids: Vec<&[f64]> = node.children.iter().map(|&c| self.values(c)).collect();
            analysis::make(&node.sym, &kids)
        };
        for &c in &node.children {
            self.classes[c.index()]
                .as_mut()
                .expect("child is canonical")
                .parents
                .push((node.clone(), id));
        }
        self.classes.push(Some(EClass {
            nodes: vec![node.clone()],
            parents: Vec::new(),
            data,
        }));
        self.memo.insert(node, id);
        self.adds += 1;
        id
    }

    /// Adds every subterm of `e` and returns the root's class.
    pub fn add_expr(&mut self, e: &Expr) -> Result<Id, EGraphError> {
        let children = e
            .children()
            .iter()
            .map(|c| self.add_expr(c))
            .collect::<Result<SmallVec<[Id; 2]>, _>>()?;
        let mut node = ENode {
            sym: e.symbol(),
            children,
        };
        node.canonicalize(&self.uf);
        if !self.memo.contains_key(&node) && self.memo.len() >= self.node_limit {
            return Err(EGraphError::NodeLimitExceeded(self.node_limit));
        }
        Ok(self.add(node))
    }

    /// Adds the instantiation of a pattern under `subst`.
    pub fn add_pattern(&mut self, p: &Pattern, subst: &Subst) -> Id {
        self.add_patnode(&p.root, subst)
    }

    pub(crate) fn add_patnode(&mut self, p: &PatNode, subst: &Subst) -> Id {
        match p {
            PatNode::Var(v) => self.find(subst.get(*v)),
            PatNode::Node(sym, kids) => {
                let children = kids.iter().map(|k| self.add_patnode(k, subst)).collect();
                self.add(ENode {
                    sym: sym.clone(),
                    children,
                })
            }
        }
    }

    /// Class representing `e`, if every subterm is already present.
    pub fn lookup_expr(&self, e: &Expr) -> Option<Id> {
        let mut node = ENode {
            sym: e.symbol(),
            children: e
                .children()
                .iter()
                .map(|c| self.lookup_expr(c))
                .collect::<Option<_>>()?,
        };
        node.canonicalize(&self.uf);
        self.memo.get(&node).map(|&id| self.find(id))
    }

    /// Merges two classes; returns the canonical id of the result.
    pub fn union(&mut self, a: Id, b: Id) -> Id {
        let Some((winner, loser)) = self.uf.union(a, b) else {
            return self.find(a);
        };
        self.merges += 1;
        let lost = self.classes[loser.index()].take().expect("loser was canonical");
        self.pending.extend(lost.parents.iter().cloned());
        let win = self.classes[winner.index()].as_mut().expect("winner is canonical");
        let grew = analysis::merge(&mut win.data, &lost.data);
        let loser_grew = win
            .data
            .iter()
            .zip(lost.data.iter())
            .any(|(w, l)| l.is_nan() && !w.is_nan());
        win.nodes.extend(lost.nodes);
        win.parents.extend(lost.parents);
        if grew || loser_grew {
            self.analysis_pending.push(winner);
        }
        winner
    }

    /// Restores congruence and hash-cons uniqueness.
    pub fn rebuild(&mut self) {
        loop {
            while !self.pending.is_empty() {
                let todo = std::mem::take(&mut self.pending);
                for (mut node, class) in todo {
                    node.canonicalize(&self.uf);
                    let class = self.uf.find_mut(class);
                    match self.memo.get(&node) {
                        Some(&other) => {
                            if self.find(other) != class {
                                self.union(other, class);
                            }
                        }
                        None => {
                            self.memo.insert(node, class);
                        }
                    }
                }
            }
            self.propagate_analysis();
            self.normalize_classes();
            if self.rehash() {
                break;
            }
        }
    }

    fn propagate_analysis(&mut self) {
        while !self.analysis_pending.is_empty() {
            let mut todo = std::mem::take(&mut self.analysis_pending);
            for id in todo.iter_mut() {
                *id = self.find(*id);
            }
            todo.sort_unstable();
            todo.dedup();
            for id in todo {
                let parents = std::mem::take(&mut self.classes[id.index()].as_mut().expect("canonical").parents);
                for (node, p) in &parents {
                    let p = self.find(*p);
                    if !self.values(p).iter().any(|v| v.is_nan()) {
                        continue;
                    }
                    let v = {
                        let kids: Vec<&[f64]> = node.children.iter().map(|&c| self.values(c)).collect();
                        analysis::make(&node.sym, &kids)
                    };
                    let class = self.classes[p.index()].as_mut().expect("canonical");
                    if analysis::merge(&mut class.data, &v) {
                        self.analysis_pending.push(p);
                    }
                }
                let class = self.classes[id.index()].as_mut().expect("canonical");
                debug_assert!(class.parents.is_empty());
                class.parents = parents;
            }
        }
    }

    fn normalize_classes(&mut self) {
        let uf = &self.uf;
        for class in self.classes.iter_mut().flatten() {
            for n in class.nodes.iter_mut() {
                n.canonicalize(uf);
            }
            class.nodes.sort_unstable();
            class.nodes.dedup();
            for (n, p) in class.parents.iter_mut() {
                n.canonicalize(uf);
                *p = uf.find(*p);
            }
            class.parents.sort_unstable();
            class.parents.dedup();
        }
    }

    /// Rebuilds the hash-cons from class contents. Returns false (after
    /// queuing the merge) if two classes share a canonical node.
    fn rehash(&mut self) -> bool {
        self.memo.clear();
        let mut clash = None;
        for (i, class) in self.classes.iter().enumerate() {
            let Some(class) = class else { continue };
            for n in &class.nodes {
                if let Some(&prev) = self.memo.get(n) {
                    clash = Some((prev, Id(i as u32)));
                    break;
                }
                self.memo.insert(n.clone(), Id(i as u32));
            }
            if clash.is_some() {
                break;
            }
        }
        match clash {
            Some((a, b)) => {
                self.union(a, b);
                false
            }
            None => true,
        }
    }

    /// Exhaustive invariant check, quadratic in the node count. Meant for tests.
    pub fn audit(&self) -> Result<(), AuditError> {
        let fail = |msg: String| Err(AuditError(msg));
        if self.is_dirty() {
            return fail("graph is dirty".into());
        }
        let mut all: Vec<(Id, &ENode)> = Vec::new();
        for id in self.class_ids() {
            if self.find(id) != id {
                return fail(format!("{id} stored but not canonical"));
            }
            let nodes = self.nodes(id);
            if nodes.is_empty() {
                return fail(format!("{id} is empty"));
            }
            for n in nodes {
                for &c in &n.children {
                    let root = self.find(c);
                    if self.classes.get(root.index()).is_none_or(|c| c.is_none()) {
                        return fail(format!("{n} in {id} references a missing class"));
                    }
                    if root != c {
                        return fail(format!("{n} in {id} has a non-canonical child"));
                    }
                }
                match self.memo.get(n) {
                    Some(&m) if self.find(m) == id => {}
                    _ => return fail(format!("{n} in {id} missing from hashcons")),
                }
                all.push((id, n));
            }
        }
        for (i, (ca, a)) in all.iter().enumerate() {
            for (cb, b) in &all[i + 1..] {
                let congruent = a.sym == b.sym
                    && a.children.len() == b.children.len()
                    && a.children
                        .iter()
                        .zip(&b.children)
                        .all(|(x, y)| self.find(*x) == self.find(*y));
                if congruent && self.find(*ca) != self.find(*cb) {
                    return fail(format!("congruent {a} in {ca} and {b} in {cb} not merged"));
                }
                if a == b && ca != cb {
                    return fail(format!("{a} hash-consed into both {ca} and {cb}"));
                }
            }
        }
        if self.memo.len() != all.len() {
            return fail(format!(
                "hashcons has {} entries for {} nodes",
                self.memo.len(),
                all.len()
            ));
        }
        Ok(())
    }

    /// One line per class, `e<k>: [node, ...]`, classes by id and nodes sorted
    /// by their printed form.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for id in self.class_ids() {
            let mut nodes: Vec<String> = self.nodes(id).iter().map(|n| n.to_string()).collect();
            nodes.sort();
            let _ = writeln!(out, "{id}: [{}]", nodes.join(", "));
        }
        out
    }
}
