//! Deterministic random instance generation for tests and experiments.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::colour::BaseLists;
use crate::graph::Graph;
use crate::rng::{tags, StreamKey};

/// Uniform graph with `n` vertices and `m` distinct edges.
pub fn random_gnm(n: u32, m: usize, key: StreamKey) -> Graph {
    let max = (n as usize) * (n as usize - 1) / 2;
    let m = m.min(max);
    let mut all: Vec<[u32; 2]> = Vec::with_capacity(max);
    for u in 0..n {
        for v in (u + 1)..n {
            all.push([u, v]);
        }
    }
    let mut rng = key.child(tags::CORPUS).rng();
    all.shuffle(&mut rng);
    all.truncate(m);
    Graph::new(n, &all).unwrap()
}

/// Graph where every vertex aims for degree `d`: a union of `d` random
/// near-perfect matchings, deduplicated.
pub fn random_near_regular(n: u32, d: u32, key: StreamKey) -> Graph {
    let mut rng = key.child(tags::CORPUS).child(1).rng();
    let mut pairs: Vec<[u32; 2]> = Vec::new();
    for _ in 0..d {
        let mut vertices: Vec<u32> = (0..n).collect();
        vertices.shuffle(&mut rng);
        for chunk in vertices.chunks_exact(2) {
            let (a, b) = (chunk[0].min(chunk[1]), chunk[0].max(chunk[1]));
            if !pairs.contains(&[a, b]) {
                pairs.push([a, b]);
            }
        }
    }
    Graph::new(n, &pairs).unwrap()
}

/// Per-edge lists drawn uniformly: `size` colours out of `palette`.
pub fn random_lists(g: &Graph, palette: u32, size: usize, key: StreamKey) -> BaseLists {
    let mut lists = Vec::with_capacity(g.edge_count());
    for e in 0..g.edge_count() {
        let mut rng = key.child(tags::CORPUS).child(2).child(e as u64).rng();
        let mut chosen: Vec<u32> = Vec::with_capacity(size);
        while chosen.len() < size.min(palette as usize) {
            let c = rng.random_range(0..palette);
            if !chosen.contains(&c) {
                chosen.push(c);
            }
        }
        chosen.sort_unstable();
        lists.push(chosen);
    }
    lists
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gnm_is_deterministic_and_sized() {
        let a = random_gnm(20, 40, StreamKey::root(5));
        let b = random_gnm(20, 40, StreamKey::root(5));
        assert_eq!(a.edges(), b.edges());
        assert_eq!(a.edge_count(), 40);
        assert_ne!(a.edges(), random_gnm(20, 40, StreamKey::root(6)).edges());
    }

    #[test]
    fn near_regular_hits_target_degree() {
        let g = random_near_regular(40, 8, StreamKey::root(3));
        assert!(g.max_degree() <= 8);
        let avg = 2.0 * g.edge_count() as f64 / 40.0;
        assert!(avg > 6.0, "average degree {avg}");
    }
}
