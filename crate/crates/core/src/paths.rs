//! Suspicious and dangerous path queries over a colouring snapshot.
//!
//! For a query colour `c` with twin `c'`, paths alternate by edge position:
//! odd positions carry `c'`, even positions carry `c`. A path is *dangerous*
//! for `(u,v,c)` when it runs from `u` to `v` fully coloured in that pattern,
//! starting and ending with `c'` — colouring the edge `uv` with `c` would then
//! close a cycle that is monochromatic in base colours. A *suspicious* path is
//! a partially coloured candidate: coloured edges already match the pattern,
//! uncoloured edges still hold the required colour in their list, and the
//! last edge is uncoloured. Its *uncoloured length* counts its uncoloured
//! edges.
//!
//! All queries are read-only over a snapshot and safe to run concurrently on
//! shared state. Enumeration order is fixed by edge ids, so repeated calls on
//! the same snapshot return identical sequences.

use crate::colour::{PartialColouring, TwinColour, TwinLists};
use crate::graph::{EdgeId, Graph, Vertex};

/// A read-only snapshot of graph + current lists + partial colouring.
#[derive(Clone, Copy)]
pub struct StateView<'a> {
    pub graph: &'a Graph,
    pub lists: &'a TwinLists,
    pub gamma: &'a PartialColouring,
}

impl<'a> StateView<'a> {
    pub fn new(graph: &'a Graph, lists: &'a TwinLists, gamma: &'a PartialColouring) -> Self {
        StateView {
            graph,
            lists,
            gamma,
        }
    }

    fn list_has(&self, e: EdgeId, c: TwinColour) -> bool {
        self.lists[e].binary_search(&c).is_ok()
    }
}

/// Required pattern colour at 1-based edge position `pos`.
fn required(c: TwinColour, pos: usize) -> TwinColour {
    if pos % 2 == 1 {
        c.twin()
    } else {
        c
    }
}

/// The uncoloured edges incident to `v` whose list contains `c`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ColourNeighbourhood {
    pub vertex: Vertex,
    pub colour: TwinColour,
    pub edges: Vec<EdgeId>,
}

pub fn colour_neighbours(view: StateView, v: Vertex, c: TwinColour) -> ColourNeighbourhood {
    let edges = view
        .graph
        .incident(v)
        .iter()
        .copied()
        .filter(|&e| !view.gamma.is_coloured(e) && view.list_has(e, c))
        .collect();
    ColourNeighbourhood {
        vertex: v,
        colour: c,
        edges,
    }
}

/// Largest colour neighbourhood over all (vertex, colour) pairs; the `N`
/// parameter of the counting bounds.
pub fn max_colour_neighbourhood(view: StateView) -> usize {
    let mut best = 0;
    for v in 0..view.graph.vertex_count() {
        let mut counts: std::collections::BTreeMap<TwinColour, usize> = Default::default();
        for &e in view.graph.incident(v) {
            if !view.gamma.is_coloured(e) {
                for &c in &view.lists[e] {
                    *counts.entry(c).or_default() += 1;
                }
            }
        }
        best = best.max(counts.values().copied().max().unwrap_or(0));
    }
    best
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SuspiciousPath {
    pub vertices: Vec<Vertex>,
    pub uncoloured_len: usize,
}

impl SuspiciousPath {
    pub fn start(&self) -> Vertex {
        self.vertices[0]
    }

    pub fn end(&self) -> Vertex {
        *self.vertices.last().unwrap()
    }

    pub fn edge_positions<'a>(
        &'a self,
        g: &'a Graph,
    ) -> impl Iterator<Item = (usize, Option<EdgeId>)> + 'a {
        self.vertices
            .windows(2)
            .enumerate()
            .map(move |(i, w)| (i + 1, g.edge_between(w[0], w[1])))
    }
}

struct Dfs<'a> {
    view: StateView<'a>,
    colour: TwinColour,
    budget: usize,
    end: Option<Vertex>,
    visited: Vec<bool>,
    stack: Vec<Vertex>,
    out: Vec<SuspiciousPath>,
}

impl Dfs<'_> {
    fn run(&mut self, used: usize, pos: usize) {
        let x = *self.stack.last().unwrap();
        let r = required(self.colour, pos);
        for &f in self.view.graph.incident(x) {
            let y = self.view.graph.other_endpoint(f, x);
            if self.visited[y as usize] {
                continue;
            }
            match self.view.gamma.get(f) {
                Some(col) => {
                    // Coloured edges must match the pattern and cost no budget;
                    // past the final uncoloured edge nothing can be recorded.
                    if col == r && used < self.budget && self.end != Some(y) {
                        self.descend(y, used, pos);
                    }
                }
                None => {
                    if self.view.list_has(f, r) {
                        let now = used + 1;
                        if now == self.budget {
                            if self.end.is_none() || self.end == Some(y) {
                                let mut vertices = self.stack.clone();
                                vertices.push(y);
                                self.out.push(SuspiciousPath {
                                    vertices,
                                    uncoloured_len: now,
                                });
                            }
                        } else if self.end != Some(y) {
                            self.descend(y, now, pos);
                        }
                    }
                }
            }
        }
    }

    fn descend(&mut self, y: Vertex, used: usize, pos: usize) {
        self.visited[y as usize] = true;
        self.stack.push(y);
        self.run(used, pos + 1);
        self.stack.pop();
        self.visited[y as usize] = false;
    }
}

fn enumerate(
    view: StateView,
    u: Vertex,
    end: Option<Vertex>,
    c: TwinColour,
    k: usize,
) -> Vec<SuspiciousPath> {
    if k == 0 {
        return Vec::new();
    }
    let mut visited = vec![false; view.graph.vertex_count() as usize];
    visited[u as usize] = true;
    let mut dfs = Dfs {
        view,
        colour: c,
        budget: k,
        end,
        visited,
        stack: vec![u],
        out: Vec::new(),
    };
    dfs.run(0, 1);
    dfs.out
}

/// All suspicious paths for `(u,v,c)` of uncoloured length exactly `k`.
pub fn enumerate_suspicious(
    view: StateView,
    u: Vertex,
    v: Vertex,
    c: TwinColour,
    k: usize,
) -> Vec<SuspiciousPath> {
    enumerate(view, u, Some(v), c, k)
}

/// Union over all end vertices: suspicious paths from `u` of uncoloured
/// length exactly `k`.
pub fn enumerate_suspicious_open(
    view: StateView,
    u: Vertex,
    c: TwinColour,
    k: usize,
) -> Vec<SuspiciousPath> {
    enumerate(view, u, None, c, k)
}

/// The monitored path set for an uncoloured edge `uv` and colour `c`: pair
/// paths of uncoloured length below `ell`, plus open paths of uncoloured
/// length exactly `ell` from either endpoint.
pub fn danger_set(
    view: StateView,
    u: Vertex,
    v: Vertex,
    c: TwinColour,
    ell: usize,
) -> Vec<SuspiciousPath> {
    let mut out = Vec::new();
    for k in 1..ell {
        out.extend(enumerate_suspicious(view, u, v, c, k));
    }
    out.extend(enumerate_suspicious_open(view, u, c, ell));
    out.extend(enumerate_suspicious_open(view, v, c, ell));
    out
}

/// Whether `p` is dangerous for `(u,v,c)` under `gamma`: fully coloured,
/// alternating with the twin colour at both ends.
pub fn is_dangerous(
    p: &SuspiciousPath,
    g: &Graph,
    gamma: &PartialColouring,
    u: Vertex,
    v: Vertex,
    c: TwinColour,
) -> bool {
    if p.vertices.len() < 2 || p.start() != u || p.end() != v {
        return false;
    }
    let edge_count = p.vertices.len() - 1;
    if edge_count.is_multiple_of(2) {
        return false; // must end on an odd position to finish with the twin
    }
    for (pos, edge) in p.edge_positions(g) {
        match edge {
            Some(e) => {
                if gamma.get(e) != Some(required(c, pos)) {
                    return false;
                }
            }
            None => return false,
        }
    }
    true
}

/// Whether a dangerous path for `(u,v,c)` exists under the current colouring.
/// Walks the unique maximal coloured alternating path from `u`; the state's
/// properness makes the continuation at each step unique.
pub fn has_dangerous_path(view: StateView, e: EdgeId, c: TwinColour) -> bool {
    let [u, v] = view.graph.endpoints(e);
    debug_assert!(!view.gamma.is_coloured(e));
    let mut visited = vec![false; view.graph.vertex_count() as usize];
    let mut x = u;
    visited[u as usize] = true;
    let mut pos = 1usize;
    loop {
        let r = required(c, pos);
        let mut next = None;
        for &f in view.graph.incident(x) {
            if view.gamma.get(f) == Some(r) {
                next = Some(view.graph.other_endpoint(f, x));
                break;
            }
        }
        let Some(y) = next else {
            return false;
        };
        if visited[y as usize] {
            return false;
        }
        if pos % 2 == 1 && y == v {
            return true;
        }
        visited[y as usize] = true;
        x = y;
        pos += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colour::product_lists;
    use crate::graph::Graph;

    fn c(base: u32, copy: u8) -> TwinColour {
        TwinColour::new(base, copy)
    }

    fn uniform_lists(g: &Graph, bases: &[u32]) -> TwinLists {
        product_lists(&vec![bases.to_vec(); g.edge_count()])
    }

    #[test]
    fn colour_neighbours_basics() {
        let g = Graph::star(3);
        let mut lists = uniform_lists(&g, &[4]);
        let mut gamma = PartialColouring::empty(g.edge_count());

        let nb = colour_neighbours(StateView::new(&g, &lists, &gamma), 0, c(4, 1));
        assert_eq!(nb.edges.len(), 3);

        lists[1].retain(|&x| x != c(4, 1));
        let nb = colour_neighbours(StateView::new(&g, &lists, &gamma), 0, c(4, 1));
        assert_eq!(nb.edges.len(), 2);

        for e in 0..g.edge_count() {
            gamma.set(e, c(9, 1));
        }
        let nb = colour_neighbours(StateView::new(&g, &lists, &gamma), 0, c(4, 1));
        assert!(nb.edges.is_empty());
    }

    #[test]
    fn single_edge_pair_path() {
        let g = Graph::new(2, &[[0, 1]]).unwrap();
        let lists = uniform_lists(&g, &[4]);
        let gamma = PartialColouring::empty(1);
        let view = StateView::new(&g, &lists, &gamma);
        // position 1 is odd, so the edge needs the twin of the query colour;
        // uniform product lists contain both copies.
        let paths = enumerate_suspicious(view, 0, 1, c(4, 2), 1);
        assert_eq!(paths.len(), 1);
        assert_eq!(paths[0].vertices, vec![0, 1]);
        assert_eq!(paths[0].uncoloured_len, 1);
    }

    #[test]
    fn first_step_blocked_without_twin_in_list() {
        let g = Graph::new(2, &[[0, 1]]).unwrap();
        let lists: TwinLists = vec![vec![c(4, 2)]]; // only (4,2); query twin is (4,2)'s twin
        let gamma = PartialColouring::empty(1);
        let view = StateView::new(&g, &lists, &gamma);
        // query colour (4,2): required first colour is (4,1), absent
        assert!(enumerate_suspicious(view, 0, 1, c(4, 2), 1).is_empty());
    }

    #[test]
    fn open_star_counts_candidates() {
        let g = Graph::star(3);
        let lists = uniform_lists(&g, &[4]);
        let gamma = PartialColouring::empty(g.edge_count());
        let view = StateView::new(&g, &lists, &gamma);
        let paths = enumerate_suspicious_open(view, 0, c(4, 1), 1);
        assert_eq!(paths.len(), 3);
        assert!(enumerate_suspicious_open(view, 1, c(9, 1), 1).is_empty());
    }

    #[test]
    fn enumeration_is_deterministic() {
        let g = Graph::complete(5);
        let lists = uniform_lists(&g, &[1, 2]);
        let gamma = PartialColouring::empty(g.edge_count());
        let view = StateView::new(&g, &lists, &gamma);
        let a = enumerate_suspicious_open(view, 0, c(1, 1), 3);
        let b = enumerate_suspicious_open(view, 0, c(1, 1), 3);
        assert_eq!(a, b);
        assert!(!a.is_empty());
    }

    #[test]
    fn danger_set_of_lonely_pair_is_the_edge_itself() {
        let g = Graph::new(2, &[[0, 1]]).unwrap();
        let lists = uniform_lists(&g, &[4]);
        let gamma = PartialColouring::empty(1);
        let view = StateView::new(&g, &lists, &gamma);
        let set = danger_set(view, 0, 1, c(4, 1), 3);
        assert_eq!(set.len(), 1);
        assert_eq!(set[0].vertices, vec![0, 1]);
    }

    #[test]
    fn danger_set_empty_without_candidates() {
        let g = Graph::path(4);
        let lists: TwinLists = vec![vec![c(1, 1)]; 3];
        let gamma = PartialColouring::empty(3);
        let view = StateView::new(&g, &lists, &gamma);
        // query (7,1): no list anywhere near holds colour 7
        assert!(danger_set(view, 1, 2, c(7, 1), 3).is_empty());
    }

    #[test]
    fn danger_set_respects_counting_cap() {
        // Cycle instance: colour neighbourhoods have size at most 2.
        let g = Graph::cycle(5);
        let lists = uniform_lists(&g, &[4]);
        let mut gamma = PartialColouring::empty(g.edge_count());
        // colour one edge to mix coloured segments in
        gamma.set(g.edge_between(2, 3).unwrap(), c(4, 2));
        let view = StateView::new(&g, &lists, &gamma);
        let n = max_colour_neighbourhood(view);
        assert_eq!(n, 2);
        let ell = 3usize;
        let set = danger_set(view, 0, 1, c(4, 1), ell);
        assert!(!set.is_empty());
        let bound = 2 * n.pow(ell as u32) + (1..ell).map(|k| n.pow(k as u32 - 1)).sum::<usize>();
        assert!(set.len() <= bound, "{} > {}", set.len(), bound);
    }

    #[test]
    fn dangerous_recognition() {
        // u=0, x=1, y=2, v=3; pattern for colour c=(4,1): twin (4,2) on odd
        // positions, (4,1) on even.
        let g = Graph::path(4);
        let _lists = uniform_lists(&g, &[4]);
        let mut gamma = PartialColouring::empty(3);
        gamma.set(0, c(4, 2));
        gamma.set(1, c(4, 1));
        gamma.set(2, c(4, 2));
        let p = SuspiciousPath {
            vertices: vec![0, 1, 2, 3],
            uncoloured_len: 0,
        };
        assert!(is_dangerous(&p, &g, &gamma, 0, 3, c(4, 1)));

        let mut open = gamma.clone();
        open.unset(1);
        assert!(!is_dangerous(&p, &g, &open, 0, 3, c(4, 1)));

        let mut wrong = gamma.clone();
        wrong.set(1, c(9, 1));
        assert!(!is_dangerous(&p, &g, &wrong, 0, 3, c(4, 1)));

        // even-length pattern never qualifies
        let q = SuspiciousPath {
            vertices: vec![0, 1, 2],
            uncoloured_len: 0,
        };
        assert!(!is_dangerous(&q, &g, &gamma, 0, 2, c(4, 1)));
        assert!(!is_dangerous(&p, &g, &gamma, 0, 3, c(4, 2))); // wrong orientation of pattern
    }

    #[test]
    fn dangerous_walk_detection() {
        // square 0-1-2-3 plus the uncoloured probe edge 0-3
        let g = Graph::cycle(4);
        let lists = uniform_lists(&g, &[4]);
        let mut gamma = PartialColouring::empty(g.edge_count());
        let e01 = g.edge_between(0, 1).unwrap();
        let e12 = g.edge_between(1, 2).unwrap();
        let e23 = g.edge_between(2, 3).unwrap();
        let probe = g.edge_between(0, 3).unwrap();
        gamma.set(e01, c(4, 2));
        gamma.set(e12, c(4, 1));
        gamma.set(e23, c(4, 2));
        let view = StateView::new(&g, &lists, &gamma);
        assert!(has_dangerous_path(view, probe, c(4, 1)));

        let mut broken = gamma.clone();
        broken.unset(e12);
        let view = StateView::new(&g, &lists, &broken);
        assert!(!has_dangerous_path(view, probe, c(4, 1)));

        let fresh = PartialColouring::empty(g.edge_count());
        let view = StateView::new(&g, &lists, &fresh);
        for e in 0..g.edge_count() {
            for copy in [1, 2] {
                assert!(!has_dangerous_path(view, e, c(4, copy)));
            }
        }
    }
}
