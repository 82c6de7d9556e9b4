use smallvec::SmallVec;

use super::{EGraph, ENode, Id};
use crate::expr::Symbol;
use crate::rules::{PatNode, PatVar, Pattern};

/// Binding of every pattern variable to an e-class, indexed by [`PatVar`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Subst {
    ids: SmallVec<[Id; 4]>,
}

impl Subst {
    pub fn new(ids: impl IntoIterator<Item = Id>) -> Self {
        Subst {
            ids: ids.into_iter().collect(),
        }
    }

    pub fn get(&self, v: PatVar) -> Id {
        self.ids[v.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[Id] {
        &self.ids
    }
}

type Slots = SmallVec<[Option<Id>; 4]>;

impl EGraph {
    /// Every `(class, σ)` such that the pattern instantiated under σ is
    /// represented in `class`. Requires a rebuilt graph.
    pub fn ematch(&self, p: &Pattern) -> Vec<(Id, Subst)> {
        debug_assert!(!self.is_dirty(), "ematch on a dirty e-graph");
        self.search_pattern(&p.root, p.var_count(), self.class_ids())
    }

    pub(crate) fn search_pattern(
        &self,
        root: &PatNode,
        nvars: usize,
        candidates: impl Iterator<Item = Id>,
    ) -> Vec<(Id, Subst)> {
        self.search_pattern_limited(root, nvars, candidates, usize::MAX)
    }

    /// Like `search_pattern`, but gives up once more than `limit` matches
    /// have been found; the result then holds at least `limit + 1` entries.
    pub(crate) fn search_pattern_limited(
        &self,
        root: &PatNode,
        nvars: usize,
        candidates: impl Iterator<Item = Id>,
        limit: usize,
    ) -> Vec<(Id, Subst)> {
        let mut out = Vec::new();
        let mut found = Vec::new();
        let mut goals = Vec::new();
        let mut slots: Slots = SmallVec::from_elem(None, nvars);
        for class in candidates {
            goals.push((root, class));
            let budget = limit.saturating_sub(out.len()).saturating_add(1);
            self.search(&mut goals, &mut slots, &mut found, budget);
            goals.clear();
            found.sort_unstable();
            found.dedup();
            out.extend(found.drain(..).map(|s| (class, s)));
            if out.len() > limit {
                break;
            }
        }
        out
    }

    fn nodes_with_sym(&self, class: Id, sym: &Symbol) -> &[ENode] {
        let nodes = self.nodes(class);
        let lo = nodes.partition_point(|n| n.sym < *sym);
        let hi = lo + nodes[lo..].partition_point(|n| n.sym == *sym);
        &nodes[lo..hi]
    }

    fn search(&self, goals: &mut Vec<(&PatNode, Id)>, slots: &mut Slots, out: &mut Vec<Subst>, budget: usize) {
        if out.len() >= budget {
            return;
        }
        let Some((pat, class)) = goals.pop() else {
            out.push(Subst {
                ids: slots.iter().map(|s| s.expect("every variable bound")).collect(),
            });
            return;
        };
        match pat {
            PatNode::Var(v) => {
                let slot = v.0 as usize;
                match slots[slot] {
                    Some(bound) => {
                        if self.find(bound) == class {
                            self.search(goals, slots, out, budget);
                        }
                    }
                    None => {
                        slots[slot] = Some(class);
                        self.search(goals, slots, out, budget);
                        slots[slot] = None;
                    }
                }
            }
            PatNode::Node(sym, kids) => {
                for node in self.nodes_with_sym(class, sym) {
                    let depth = goals.len();
                    for (k, &c) in kids.iter().zip(&node.children).rev() {
                        goals.push((k, c));
                    }
                    self.search(goals, slots, out, budget);
                    goals.truncate(depth);
                }
            }
        }
        goals.push((pat, class));
    }
}
