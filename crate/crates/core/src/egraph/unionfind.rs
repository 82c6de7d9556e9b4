use super::Id;

/// Union by rank with path compression.
#[derive(Debug, Clone, Default)]
pub struct UnionFind {
    parents: Vec<u32>,
    ranks: Vec<u8>,
}

impl UnionFind {
    pub fn make_set(&mut self) -> Id {
        let id = self.parents.len() as u32;
        self.parents.push(id);
        self.ranks.push(0);
        Id(id)
    }

    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    /// Read-only find; no compression.
    pub fn find(&self, id: Id) -> Id {
        let mut cur = id.0;
        while self.parents[cur as usize] != cur {
            cur = self.parents[cur as usize];
        }
        Id(cur)
    }

    pub fn find_mut(&mut self, id: Id) -> Id {
        let root = self.find(id);
        let mut cur = id.0;
        while cur != root.0 {
            let next = self.parents[cur as usize];
            self.parents[cur as usize] = root.0;
            cur = next;
        }
        root
    }

    /// Merges two sets and returns `(winner, loser)` roots, or `None` if
    /// they were already one set.
    pub fn union(&mut self, a: Id, b: Id) -> Option<(Id, Id)> {
        let a = self.find_mut(a);
        let b = self.find_mut(b);
        if a == b {
            return None;
        }
        let (ra, rb) = (self.ranks[a.0 as usize], self.ranks[b.0 as usize]);
        let (winner, loser) = if ra >= rb { (a, b) } else { (b, a) };
        self.parents[loser.0 as usize] = winner.0;
        if ra == rb {
            self.ranks[winner.0 as usize] += 1;
        }
        Some((winner, loser))
    }
}
