//! Exact brute-force ground truth for tiny instances.
//!
//! `exact_linear_arboricity` answers the minimum number of linear forests
//! partitioning the edge set, by branch-and-bound over class assignments with
//! union-find cycle pruning. First-use class ordering (a new class may only
//! be opened as the next unused index) kills class-permutation symmetry.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::colour::{BaseLists, Decomposition};
use crate::dsu::UnionFind;
use crate::graph::{EdgeId, Graph};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("size limit exceeded: {0}")]
    SizeLimit(String),
}

/// Minimum number of linear forests partitioning `E(g)`.
/// Exhaustive; requires at most 24 edges.
pub fn exact_linear_arboricity(g: &Graph) -> Result<u32, OracleError> {
    if g.edge_count() > 24 {
        return Err(OracleError::SizeLimit(format!(
            "{} edges > 24",
            g.edge_count()
        )));
    }
    if g.edge_count() == 0 {
        return Ok(0);
    }
    let lower = g.max_degree().div_ceil(2).max(1);
    for k in lower..=(g.max_degree() + 1) {
        if feasible_with_classes(g, k as usize) {
            return Ok(k);
        }
    }
    unreachable!("a proper edge colouring always yields max_degree + 1 matchings")
}

struct ClassSearch<'a> {
    g: &'a Graph,
    k: usize,
    degree: Vec<Vec<u8>>,
    forests: Vec<UnionFind>,
    assignment: Vec<usize>,
}

impl ClassSearch<'_> {
    fn place(&mut self, e: EdgeId, used: usize) -> bool {
        if e == self.g.edge_count() {
            return true;
        }
        let [u, v] = self.g.endpoints(e);
        let limit = (used + 1).min(self.k);
        for t in 0..limit {
            if self.degree[t][u as usize] >= 2 || self.degree[t][v as usize] >= 2 {
                continue;
            }
            if self.forests[t].same(u, v) {
                continue;
            }
            let mark = self.forests[t].mark();
            self.forests[t].union(u, v);
            self.degree[t][u as usize] += 1;
            self.degree[t][v as usize] += 1;
            self.assignment[e] = t;
            if self.place(e + 1, used.max(t + 1)) {
                return true;
            }
            self.degree[t][u as usize] -= 1;
            self.degree[t][v as usize] -= 1;
            self.forests[t].rollback(mark);
        }
        false
    }
}

fn feasible_with_classes(g: &Graph, k: usize) -> bool {
    let n = g.vertex_count() as usize;
    let mut search = ClassSearch {
        g,
        k,
        degree: vec![vec![0u8; n]; k],
        forests: (0..k).map(|_| UnionFind::new(n)).collect(),
        assignment: vec![0; g.edge_count()],
    };
    search.place(0, 0)
}

/// Split into linear forests witnessing `exact_linear_arboricity`.
pub fn exact_decomposition(g: &Graph) -> Result<Decomposition, OracleError> {
    let k = exact_linear_arboricity(g)?;
    let n = g.vertex_count() as usize;
    let mut search = ClassSearch {
        g,
        k: k as usize,
        degree: vec![vec![0u8; n]; k as usize],
        forests: (0..k).map(|_| UnionFind::new(n)).collect(),
        assignment: vec![0; g.edge_count()],
    };
    let ok = g.edge_count() == 0 || search.place(0, 0);
    assert!(ok, "feasibility already established");
    let mut d = Decomposition::default();
    for (e, &t) in search.assignment.iter().enumerate() {
        d.classes.entry(t as u32).or_default().push(g.endpoints(e));
    }
    d.normalize();
    Ok(d)
}

// ---------------------------------------------------------------------------
// Exhaustive enumeration of small connected graphs up to isomorphism
// ---------------------------------------------------------------------------

fn pair_index(n: u32, u: u32, v: u32) -> u32 {
    debug_assert!(u < v && v < n);
    let mut idx = 0;
    for a in 0..u {
        idx += n - 1 - a;
    }
    idx + (v - u - 1)
}

fn mask_to_pairs(n: u32, mask: u64) -> Vec<[u32; 2]> {
    let mut pairs = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if mask >> pair_index(n, u, v) & 1 == 1 {
                pairs.push([u, v]);
            }
        }
    }
    pairs
}

fn connected_mask(n: u32, mask: u64) -> bool {
    if n == 0 {
        return false;
    }
    let mut adj = vec![0u64; n as usize];
    for u in 0..n {
        for v in (u + 1)..n {
            if mask >> pair_index(n, u, v) & 1 == 1 {
                adj[u as usize] |= 1 << v;
                adj[v as usize] |= 1 << u;
            }
        }
    }
    let mut seen: u64 = 1;
    let mut frontier: u64 = 1;
    while frontier != 0 {
        let mut next = 0u64;
        let mut f = frontier;
        while f != 0 {
            let v = f.trailing_zeros() as usize;
            f &= f - 1;
            next |= adj[v];
        }
        frontier = next & !seen;
        seen |= next;
    }
    seen.count_ones() == n
}

/// All permutations of `0..n` mapping equal-degree vertices onto one another,
/// composed with the degree-sorting base order. Isomorphisms preserve
/// degrees, so the minimum relabeled bitmask over these is a canonical form.
fn canonical_form(n: u32, pairs: &[[u32; 2]]) -> (Vec<u32>, u64) {
    let mut degree = vec![0u32; n as usize];
    for &[u, v] in pairs {
        degree[u as usize] += 1;
        degree[v as usize] += 1;
    }
    let mut order: Vec<u32> = (0..n).collect();
    order.sort_by_key(|&v| (std::cmp::Reverse(degree[v as usize]), v));
    let sorted_degrees: Vec<u32> = order.iter().map(|&v| degree[v as usize]).collect();
    // class boundaries of equal degree in the sorted order
    let mut classes: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=order.len() {
        if i == order.len() || sorted_degrees[i] != sorted_degrees[start] {
            classes.push((start, i));
            start = i;
        }
    }
    let mut best = u64::MAX;
    let mut perm = order.clone();
    permute_classes(&classes, 0, &mut perm, &mut |p| {
        // position i in the canonical labelling is taken by vertex p[i]
        let mut inverse = vec![0u32; n as usize];
        for (i, &v) in p.iter().enumerate() {
            inverse[v as usize] = i as u32;
        }
        let mut bits = 0u64;
        for &[u, v] in pairs {
            let a = inverse[u as usize].min(inverse[v as usize]);
            let b = inverse[u as usize].max(inverse[v as usize]);
            bits |= 1 << pair_index(n, a, b);
        }
        if bits < best {
            best = bits;
        }
    });
    (sorted_degrees, best)
}

fn permute_classes(
    classes: &[(usize, usize)],
    idx: usize,
    perm: &mut Vec<u32>,
    visit: &mut impl FnMut(&[u32]),
) {
    if idx == classes.len() {
        visit(perm);
        return;
    }
    let (lo, hi) = classes[idx];
    heap_permute(perm, lo, hi, idx, classes, visit);
}

fn heap_permute(
    perm: &mut Vec<u32>,
    lo: usize,
    hi: usize,
    idx: usize,
    classes: &[(usize, usize)],
    visit: &mut impl FnMut(&[u32]),
) {
    // recursive swap permutation of perm[lo..hi], then continue to next class
    fn rec(
        perm: &mut Vec<u32>,
        at: usize,
        hi: usize,
        idx: usize,
        classes: &[(usize, usize)],
        visit: &mut impl FnMut(&[u32]),
    ) {
        if at + 1 >= hi {
            permute_classes(classes, idx + 1, perm, visit);
            return;
        }
        for i in at..hi {
            perm.swap(at, i);
            rec(perm, at + 1, hi, idx, classes, visit);
            perm.swap(at, i);
        }
    }
    rec(perm, lo, hi, idx, classes, visit);
}

/// Connected graphs on exactly `n` vertices, one representative per
/// isomorphism class.
pub fn connected_graphs_up_to_iso(n: u32) -> Vec<Graph> {
    assert!((1..=7).contains(&n), "enumeration supports 1..=7 vertices");
    let bits = n * (n - 1) / 2;
    let mut seen: BTreeSet<(Vec<u32>, u64)> = BTreeSet::new();
    let mut out = Vec::new();
    for mask in 0..(1u64 << bits) {
        if !connected_mask(n, mask) {
            continue;
        }
        let pairs = mask_to_pairs(n, mask);
        let key = canonical_form(n, &pairs);
        if seen.insert(key) {
            out.push(Graph::new(n, &pairs).unwrap());
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjectureReport {
    pub max_n: u32,
    pub graphs_checked: usize,
    /// count per (max degree, linear arboricity)
    pub distribution: BTreeMap<String, usize>,
    /// graphs with `la > ceil(delta/2)` (the regular-graph boundary cases)
    pub above_half: usize,
    /// graphs with `la > ceil((delta+1)/2)` — would be counterexamples
    pub violations: Vec<String>,
}

/// Exhaustively compute the linear arboricity of every connected graph with
/// up to `max_n` vertices and compare with `ceil((delta+1)/2)`.
pub fn conjecture_scan(max_n: u32) -> Result<ConjectureReport, OracleError> {
    if !(1..=7).contains(&max_n) {
        return Err(OracleError::SizeLimit(format!(
            "scan supports 1..=7 vertices (at 8, K8 exceeds the 24-edge cap), got {max_n}"
        )));
    }
    let mut report = ConjectureReport {
        max_n,
        graphs_checked: 0,
        distribution: BTreeMap::new(),
        above_half: 0,
        violations: Vec::new(),
    };
    for n in 1..=max_n {
        for g in connected_graphs_up_to_iso(n) {
            let la = exact_linear_arboricity(&g)?;
            let delta = g.max_degree();
            report.graphs_checked += 1;
            *report
                .distribution
                .entry(format!("delta={delta},la={la}"))
                .or_default() += 1;
            if la > delta.div_ceil(2) {
                report.above_half += 1;
            }
            if la > (delta + 1).div_ceil(2) {
                report.violations.push(format!(
                    "n={n} edges={:?} la={la} delta={delta}",
                    g.edges()
                ));
            }
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Exhaustive list 2-colouring
// ---------------------------------------------------------------------------

/// Exhaustively search for a base-colour assignment from the lists whose
/// classes are all linear forests. Requires at most 16 edges.
pub fn brute_force_list_2colouring(
    g: &Graph,
    base_lists: &BaseLists,
) -> Result<Option<Decomposition>, OracleError> {
    if g.edge_count() > 16 {
        return Err(OracleError::SizeLimit(format!(
            "{} edges > 16",
            g.edge_count()
        )));
    }
    let mut palette: Vec<u32> = base_lists.iter().flatten().copied().collect();
    palette.sort_unstable();
    palette.dedup();
    let dense: BTreeMap<u32, usize> = palette.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let n = g.vertex_count() as usize;
    let mut degree = vec![vec![0u8; n]; palette.len()];
    let mut forests: Vec<UnionFind> = (0..palette.len()).map(|_| UnionFind::new(n)).collect();
    let mut assignment: Vec<u32> = vec![0; g.edge_count()];

    fn place(
        g: &Graph,
        lists: &BaseLists,
        dense: &BTreeMap<u32, usize>,
        degree: &mut Vec<Vec<u8>>,
        forests: &mut Vec<UnionFind>,
        assignment: &mut Vec<u32>,
        e: EdgeId,
    ) -> bool {
        if e == g.edge_count() {
            return true;
        }
        let [u, v] = g.endpoints(e);
        for &c in &lists[e] {
            let t = dense[&c];
            if degree[t][u as usize] >= 2 || degree[t][v as usize] >= 2 {
                continue;
            }
            if forests[t].same(u, v) {
                continue;
            }
            let mark = forests[t].mark();
            forests[t].union(u, v);
            degree[t][u as usize] += 1;
            degree[t][v as usize] += 1;
            assignment[e] = c;
            if place(g, lists, dense, degree, forests, assignment, e + 1) {
                return true;
            }
            degree[t][u as usize] -= 1;
            degree[t][v as usize] -= 1;
            forests[t].rollback(mark);
        }
        false
    }

    if g.edge_count() > 0
        && !place(
            g,
            base_lists,
            &dense,
            &mut degree,
            &mut forests,
            &mut assignment,
            0,
        )
    {
        return Ok(None);
    }
    let mut d = Decomposition::default();
    for (e, &c) in assignment.iter().enumerate() {
        d.classes.entry(c).or_default().push(g.endpoints(e));
    }
    d.normalize();
    Ok(Some(d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colour::verify_decomposition;

    #[test]
    fn named_values() {
        assert_eq!(exact_linear_arboricity(&Graph::path(5)).unwrap(), 1);
        assert_eq!(exact_linear_arboricity(&Graph::cycle(5)).unwrap(), 2);
        assert_eq!(exact_linear_arboricity(&Graph::complete(4)).unwrap(), 2);
    }

    #[test]
    fn la_zero_iff_no_edges_one_iff_linear_forest() {
        let empty = Graph::new(5, &[]).unwrap();
        assert_eq!(exact_linear_arboricity(&empty).unwrap(), 0);
        let forest = Graph::new(6, &[[0, 1], [1, 2], [3, 4]]).unwrap();
        assert_eq!(exact_linear_arboricity(&forest).unwrap(), 1);
        let star = Graph::star(3);
        assert!(exact_linear_arboricity(&star).unwrap() > 1);
    }

    #[test]
    fn size_limit_enforced() {
        assert!(exact_linear_arboricity(&Graph::complete(8)).is_err());
    }

    #[test]
    fn witness_decomposition_verifies() {
        for g in [Graph::complete(4), Graph::cycle(6), Graph::star(4)] {
            let k = exact_linear_arboricity(&g).unwrap();
            let d = exact_decomposition(&g).unwrap();
            assert_eq!(d.num_classes() as u32, k);
            assert!(verify_decomposition(&g, &d, None).passes());
        }
    }

    #[test]
    fn enumeration_counts_match_known_values() {
        // connected graphs up to isomorphism: 1, 1, 2, 6, 21, 112
        assert_eq!(connected_graphs_up_to_iso(1).len(), 1);
        assert_eq!(connected_graphs_up_to_iso(2).len(), 1);
        assert_eq!(connected_graphs_up_to_iso(3).len(), 2);
        assert_eq!(connected_graphs_up_to_iso(4).len(), 6);
        assert_eq!(connected_graphs_up_to_iso(5).len(), 21);
    }

    #[test]
    fn scan_small_graphs_has_no_counterexample() {
        let report = conjecture_scan(5).unwrap();
        assert_eq!(report.graphs_checked, 1 + 1 + 2 + 6 + 21);
        assert!(report.violations.is_empty());
        // K2: la = 1 = ceil(1/2); C4: la = 2 above ceil(2/2) = 1
        assert!(report.above_half >= 1);
        assert!(conjecture_scan(8).is_err());
    }

    #[test]
    fn list_brute_force_triangle() {
        let g = Graph::cycle(3);
        let forced: BaseLists = vec![vec![1]; 3];
        assert!(brute_force_list_2colouring(&g, &forced).unwrap().is_none());
        let two: BaseLists = vec![vec![1, 2]; 3];
        let d = brute_force_list_2colouring(&g, &two).unwrap().unwrap();
        assert!(verify_decomposition(&g, &d, Some(&two)).passes());
    }
}
