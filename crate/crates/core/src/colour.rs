//! Colours, lists, partial colourings, decompositions and their verifiers.
//!
//! Base colours are dense non-negative integers. A [`TwinColour`] is a base
//! colour paired with a copy index in {1,2}; a proper 1-edge-colouring in twin
//! colours reads back as a 2-edge-colouring in base colours. The twin relation
//! is structural: `(c,1)` and `(c,2)` are never flattened into one integer.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsu::UnionFind;
use crate::graph::{EdgeId, Graph, Vertex};

#[derive(Debug, Error)]
pub enum ListError {
    #[error("list document: {0}")]
    Parse(String),
    #[error("lists: {0}")]
    Validation(String),
}

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TwinColour {
    base: u32,
    copy: u8,
}

impl TwinColour {
    pub fn new(base: u32, copy: u8) -> Self {
        assert!(copy == 1 || copy == 2, "copy index must be 1 or 2");
        TwinColour { base, copy }
    }

    pub fn base(self) -> u32 {
        self.base
    }

    pub fn copy(self) -> u8 {
        self.copy
    }

    /// The other member of the pair; differs only in the copy index.
    pub fn twin(self) -> Self {
        TwinColour {
            base: self.base,
            copy: 3 - self.copy,
        }
    }
}

impl fmt::Debug for TwinColour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.base, self.copy)
    }
}

impl fmt::Display for TwinColour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.base, self.copy)
    }
}

/// Per-edge sets of base colours, indexed by `EdgeId`. Sorted, no duplicates.
pub type BaseLists = Vec<Vec<u32>>;
/// Per-edge sets of twin colours, indexed by `EdgeId`. Sorted, no duplicates.
pub type TwinLists = Vec<Vec<TwinColour>>;

/// The list product: every base colour contributes both of its copies.
/// Output sizes are exactly twice input sizes.
pub fn product_lists(base: &BaseLists) -> TwinLists {
    base.iter()
        .map(|list| {
            let mut out = Vec::with_capacity(2 * list.len());
            for &c in list {
                out.push(TwinColour::new(c, 1));
                out.push(TwinColour::new(c, 2));
            }
            out.sort_unstable();
            out
        })
        .collect()
}

/// Parse the base-list JSON format: an object mapping `"u-v"` (with `u < v`)
/// to an array of integers. Every edge of the graph must have an entry.
pub fn parse_base_lists(g: &Graph, text: &str) -> Result<BaseLists, ListError> {
    let doc: BTreeMap<String, Vec<u32>> =
        serde_json::from_str(text).map_err(|e| ListError::Parse(e.to_string()))?;
    let mut lists: Vec<Option<Vec<u32>>> = vec![None; g.edge_count()];
    for (key, mut colours) in doc {
        let (us, vs) = key
            .split_once('-')
            .ok_or_else(|| ListError::Parse(format!("bad edge key {key:?}")))?;
        let u: u32 = us
            .trim()
            .parse()
            .map_err(|_| ListError::Parse(format!("bad edge key {key:?}")))?;
        let v: u32 = vs
            .trim()
            .parse()
            .map_err(|_| ListError::Parse(format!("bad edge key {key:?}")))?;
        if u >= v {
            return Err(ListError::Parse(format!(
                "edge key {key:?} must satisfy u < v"
            )));
        }
        let e = g
            .edge_between(u, v)
            .ok_or_else(|| ListError::Validation(format!("no edge ({u},{v}) in graph")))?;
        colours.sort_unstable();
        colours.dedup();
        lists[e] = Some(colours);
    }
    lists
        .into_iter()
        .enumerate()
        .map(|(e, l)| {
            l.ok_or_else(|| {
                let [u, v] = g.endpoints(e);
                ListError::Validation(format!("missing list for edge ({u},{v})"))
            })
        })
        .collect()
}

pub fn base_lists_to_json(g: &Graph, lists: &BaseLists) -> String {
    let mut doc: BTreeMap<String, Vec<u32>> = BTreeMap::new();
    for (e, list) in lists.iter().enumerate() {
        let [u, v] = g.endpoints(e);
        doc.insert(format!("{u}-{v}"), list.clone());
    }
    serde_json::to_string_pretty(&doc).unwrap()
}

/// A partial 1-edge-colouring: each edge optionally carries a twin colour.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialColouring {
    slots: Vec<Option<TwinColour>>,
}

impl PartialColouring {
    pub fn empty(edge_count: usize) -> Self {
        PartialColouring {
            slots: vec![None; edge_count],
        }
    }

    pub fn get(&self, e: EdgeId) -> Option<TwinColour> {
        self.slots[e]
    }

    pub fn set(&mut self, e: EdgeId, c: TwinColour) {
        self.slots[e] = Some(c);
    }

    pub fn unset(&mut self, e: EdgeId) {
        self.slots[e] = None;
    }

    pub fn is_coloured(&self, e: EdgeId) -> bool {
        self.slots[e].is_some()
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn coloured_count(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }

    pub fn iter(&self) -> impl Iterator<Item = (EdgeId, Option<TwinColour>)> + '_ {
        self.slots.iter().copied().enumerate()
    }

    /// True when `other` colours every edge this colouring colours, with the
    /// same colour.
    pub fn extended_by(&self, other: &PartialColouring) -> bool {
        self.slots
            .iter()
            .zip(&other.slots)
            .all(|(a, b)| a.is_none() || a == b)
    }

    /// Edges grouped by base colour, keys ascending.
    pub fn base_classes(&self) -> BTreeMap<u32, Vec<EdgeId>> {
        let mut classes: BTreeMap<u32, Vec<EdgeId>> = BTreeMap::new();
        for (e, slot) in self.slots.iter().enumerate() {
            if let Some(c) = slot {
                classes.entry(c.base()).or_default().push(e);
            }
        }
        classes
    }
}

/// One properness violation: a vertex incident to two edges of equal twin
/// colour.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwinConflict {
    pub vertex: Vertex,
    pub colour: TwinColour,
    pub edges: [EdgeId; 2],
}

/// Ground truth for 1-edge-colourings: lists every vertex incident to two
/// edges of equal twin colour. Empty result iff the colouring is proper.
pub fn verify_one_edge_colouring(g: &Graph, gamma: &PartialColouring) -> Vec<TwinConflict> {
    let mut conflicts = Vec::new();
    for v in 0..g.vertex_count() {
        let mut seen: BTreeMap<TwinColour, EdgeId> = BTreeMap::new();
        for &e in g.incident(v) {
            if let Some(c) = gamma.get(e) {
                if let Some(&first) = seen.get(&c) {
                    conflicts.push(TwinConflict {
                        vertex: v,
                        colour: c,
                        edges: [first, e],
                    });
                } else {
                    seen.insert(c, e);
                }
            }
        }
    }
    conflicts
}

/// A decomposition of the edge set into base-colour classes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Decomposition {
    pub classes: BTreeMap<u32, Vec<[Vertex; 2]>>,
}

impl Decomposition {
    pub fn num_classes(&self) -> usize {
        self.classes.values().filter(|c| !c.is_empty()).count()
    }

    pub fn normalize(&mut self) {
        for edges in self.classes.values_mut() {
            for pair in edges.iter_mut() {
                if pair[0] > pair[1] {
                    pair.swap(0, 1);
                }
            }
            edges.sort_unstable();
        }
        self.classes.retain(|_, v| !v.is_empty());
    }

    pub fn to_json(&self) -> String {
        let doc = DecompositionDoc::from(self);
        serde_json::to_string_pretty(&doc).unwrap()
    }

    pub fn from_json(text: &str) -> Result<Self, ListError> {
        let doc: DecompositionDoc =
            serde_json::from_str(text).map_err(|e| ListError::Parse(e.to_string()))?;
        let mut classes = BTreeMap::new();
        for (key, edges) in doc.classes {
            let colour: u32 = key
                .parse()
                .map_err(|_| ListError::Parse(format!("bad colour key {key:?}")))?;
            classes.insert(colour, edges);
        }
        let mut d = Decomposition { classes };
        d.normalize();
        Ok(d)
    }
}

/// Wire shape of the decomposition JSON document.
#[derive(Serialize, Deserialize)]
pub struct DecompositionDoc {
    pub classes: BTreeMap<String, Vec<[Vertex; 2]>>,
    pub num_classes: usize,
}

impl From<&Decomposition> for DecompositionDoc {
    fn from(d: &Decomposition) -> Self {
        DecompositionDoc {
            classes: d
                .classes
                .iter()
                .map(|(c, edges)| (c.to_string(), edges.clone()))
                .collect(),
            num_classes: d.num_classes(),
        }
    }
}

/// Everything the decomposition verifier can flag. Passes iff all empty.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DecompositionReport {
    /// Graph edges not covered by any class.
    pub missing_edges: Vec<[Vertex; 2]>,
    /// Pairs that do not exist in the graph.
    pub unknown_edges: Vec<[Vertex; 2]>,
    /// Edges claimed by more than one class (or twice by one class).
    pub overlapping_edges: Vec<[Vertex; 2]>,
    /// (colour, vertex) with class-degree > 2.
    pub degree_violations: Vec<(u32, Vertex)>,
    /// Monochromatic cycle witnesses: (colour, cycle vertices in order).
    pub cycles: Vec<(u32, Vec<Vertex>)>,
    /// (colour, edge) where the colour is not in the edge's list.
    pub list_violations: Vec<(u32, [Vertex; 2])>,
}

impl DecompositionReport {
    pub fn passes(&self) -> bool {
        self.missing_edges.is_empty()
            && self.unknown_edges.is_empty()
            && self.overlapping_edges.is_empty()
            && self.degree_violations.is_empty()
            && self.cycles.is_empty()
            && self.list_violations.is_empty()
    }
}

/// Find a cycle in the subgraph formed by `edges`, returning its vertices in
/// order. Union-find detects the closing edge; the witness path is recovered
/// by a DFS restricted to the previously added edges.
pub fn cycle_in_edge_set(g: &Graph, edges: &[EdgeId]) -> Option<Vec<Vertex>> {
    let mut uf = UnionFind::new(g.vertex_count() as usize);
    for (idx, &e) in edges.iter().enumerate() {
        let [u, v] = g.endpoints(e);
        if !uf.union(u, v) {
            return Some(recover_path(g, &edges[..idx], u, v));
        }
    }
    None
}

fn recover_path(g: &Graph, edges: &[EdgeId], from: Vertex, to: Vertex) -> Vec<Vertex> {
    let mut adj: BTreeMap<Vertex, Vec<Vertex>> = BTreeMap::new();
    for &e in edges {
        let [a, b] = g.endpoints(e);
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    let mut stack = vec![(from, from)];
    let mut parent: BTreeMap<Vertex, Vertex> = BTreeMap::new();
    parent.insert(from, from);
    while let Some((v, p)) = stack.pop() {
        if v == to {
            break;
        }
        if let Some(nbrs) = adj.get(&v) {
            for &w in nbrs {
                if w != p && !parent.contains_key(&w) {
                    parent.insert(w, v);
                    stack.push((w, v));
                }
            }
        }
    }
    let mut path = vec![to];
    let mut cur = to;
    while cur != from {
        cur = parent[&cur];
        path.push(cur);
    }
    path
}

/// Verify a decomposition: covering, disjoint, every class a linear forest
/// (max degree <= 2 and acyclic), and list-respecting when lists are given.
pub fn verify_decomposition(
    g: &Graph,
    d: &Decomposition,
    lists: Option<&BaseLists>,
) -> DecompositionReport {
    let mut report = DecompositionReport::default();
    let mut covered = vec![0u32; g.edge_count()];
    for (&colour, pairs) in &d.classes {
        let mut ids: Vec<EdgeId> = Vec::with_capacity(pairs.len());
        let mut degree: BTreeMap<Vertex, u32> = BTreeMap::new();
        for &[a, b] in pairs {
            let Some(e) = g.edge_between(a, b) else {
                report.unknown_edges.push([a.min(b), a.max(b)]);
                continue;
            };
            covered[e] += 1;
            ids.push(e);
            *degree.entry(a).or_default() += 1;
            *degree.entry(b).or_default() += 1;
            if let Some(lists) = lists {
                if !lists[e].contains(&colour) {
                    report.list_violations.push((colour, g.endpoints(e)));
                }
            }
        }
        for (&v, &deg) in &degree {
            if deg > 2 {
                report.degree_violations.push((colour, v));
            }
        }
        if let Some(cycle) = cycle_in_edge_set(g, &ids) {
            report.cycles.push((colour, cycle));
        }
    }
    for (e, &count) in covered.iter().enumerate() {
        if count == 0 {
            report.missing_edges.push(g.endpoints(e));
        } else if count > 1 {
            report.overlapping_edges.push(g.endpoints(e));
        }
    }
    report
}

/// A witness cycle whose edges all share one base colour, or `None`.
pub fn find_monochromatic_cycle(
    g: &Graph,
    gamma: &PartialColouring,
) -> Option<(u32, Vec<Vertex>)> {
    for (colour, edges) in gamma.base_classes() {
        if let Some(cycle) = cycle_in_edge_set(g, &edges) {
            return Some((colour, cycle));
        }
    }
    None
}
