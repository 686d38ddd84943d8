//! Union-find with optional rollback.
//!
//! Union by size, no path compression, so unions can be undone in reverse
//! order. The exhaustive searches lean on rollback; the verifiers just use
//! union/same.

pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
    history: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
            history: Vec::new(),
        }
    }

    pub fn find(&self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            x = self.parent[x as usize];
        }
        x
    }

    pub fn same(&self, a: u32, b: u32) -> bool {
        self.find(a) == self.find(b)
    }

    /// Returns false when `a` and `b` were already connected (no change).
    pub fn union(&mut self, a: u32, b: u32) -> bool {
        let mut ra = self.find(a);
        let mut rb = self.find(b);
        if ra == rb {
            return false;
        }
        if self.size[ra as usize] < self.size[rb as usize] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb as usize] = ra;
        self.size[ra as usize] += self.size[rb as usize];
        self.history.push(rb);
        true
    }

    /// Number of successful unions so far; pass back to [`UnionFind::rollback`].
    pub fn mark(&self) -> usize {
        self.history.len()
    }

    pub fn rollback(&mut self, mark: usize) {
        while self.history.len() > mark {
            let rb = self.history.pop().unwrap();
            let ra = self.parent[rb as usize];
            self.parent[rb as usize] = rb;
            self.size[ra as usize] -= self.size[rb as usize];
        }
    }
}
