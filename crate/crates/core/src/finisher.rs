//! Completing the residual graph from the reserved colours.
//!
//! Reserve lists are transposed to base colours and the remaining edges are
//! coloured by randomized greedy with conflict resampling: assign every edge
//! a uniform colour from its list, then repeatedly resample the closed
//! neighbourhood of a conflicting edge until the completion is a proper
//! 1-edge-colouring in base colours. Because completions use only colours
//! whose twin pairs were reserved at both endpoints, no base colour is shared
//! between a completed edge and an adjacent nibble-coloured edge, so merging
//! cannot close a monochromatic cycle.

use std::collections::BTreeMap;

use rand::Rng;
use serde::Serialize;

use crate::colour::{
    verify_decomposition, BaseLists, Decomposition, DecompositionReport, PartialColouring,
    TwinColour,
};
use crate::graph::{EdgeId, Graph, Vertex};
use crate::rng::{tags, StreamKey};

/// Per-edge reserve lists transposed to base colours:
/// `Res'(e) = {c : (c,1) or (c,2) in Res(e)}`.
pub type ReservePrime = Vec<Vec<u32>>;

pub fn transpose_reserve(res_e: &[Vec<TwinColour>]) -> ReservePrime {
    res_e
        .iter()
        .map(|list| {
            let mut bases: Vec<u32> = list.iter().map(|c| c.base()).collect();
            bases.sort_unstable();
            bases.dedup();
            bases
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct FinisherPrecondition {
    /// Smallest residual list.
    pub min_list: usize,
    /// Largest per-(edge, colour) count of incident residual edges sharing
    /// the colour.
    pub max_conflicts: usize,
    pub passes: bool,
}

/// The list-versus-conflict margin the completion relies on: passes iff
/// `min_list >= 8 * max_conflicts` (and at least one colour per edge).
pub fn check_finisher_precondition(
    g: &Graph,
    uncoloured: &[EdgeId],
    lists: &ReservePrime,
) -> FinisherPrecondition {
    let in_residual = {
        let mut mask = vec![false; g.edge_count()];
        for &e in uncoloured {
            mask[e] = true;
        }
        mask
    };
    let mut min_list = usize::MAX;
    let mut max_conflicts = 0usize;
    for &e in uncoloured {
        min_list = min_list.min(lists[e].len());
        let [u, v] = g.endpoints(e);
        for &c in &lists[e] {
            let mut count = 0usize;
            for &w in [u, v].iter() {
                for &f in g.incident(w) {
                    if f != e && in_residual[f] && lists[f].binary_search(&c).is_ok() {
                        count += 1;
                    }
                }
            }
            max_conflicts = max_conflicts.max(count);
        }
    }
    if uncoloured.is_empty() {
        min_list = 0;
    }
    let passes = if uncoloured.is_empty() {
        true
    } else {
        min_list >= 1 && min_list >= 8 * max_conflicts
    };
    FinisherPrecondition {
        min_list,
        max_conflicts,
        passes,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CompletionFailure {
    pub phase: String,
    pub budget_used: u64,
    pub residual_edges: Vec<[Vertex; 2]>,
    /// Conflict-free part of the best assignment found.
    #[serde(skip)]
    pub partial: Vec<(EdgeId, u32)>,
}

/// Colour every edge of `uncoloured` from its base-colour list so that no
/// vertex sees two completed edges of one colour. Budget counts individual
/// edge resamples.
pub fn complete_colouring(
    g: &Graph,
    uncoloured: &[EdgeId],
    lists: &ReservePrime,
    key: StreamKey,
    budget: u64,
) -> Result<Vec<(EdgeId, u32)>, CompletionFailure> {
    let empty: Vec<[Vertex; 2]> = uncoloured
        .iter()
        .filter(|&&e| lists[e].is_empty())
        .map(|&e| g.endpoints(e))
        .collect();
    if !empty.is_empty() {
        return Err(CompletionFailure {
            phase: "empty_list".into(),
            budget_used: 0,
            residual_edges: empty,
            partial: Vec::new(),
        });
    }
    let finish_key = key.child(tags::FINISH);
    let mut draw: BTreeMap<EdgeId, u64> = BTreeMap::new();
    let mut chosen: BTreeMap<EdgeId, u32> = BTreeMap::new();
    let mut used = 0u64;
    let sample = |e: EdgeId, draw: &mut BTreeMap<EdgeId, u64>| -> u32 {
        let n = draw.entry(e).or_insert(0);
        let idx = finish_key
            .child(e as u64)
            .child(*n)
            .rng()
            .random_range(0..lists[e].len());
        *n += 1;
        lists[e][idx]
    };
    for &e in uncoloured {
        let c = sample(e, &mut draw);
        chosen.insert(e, c);
    }
    while let Some(conflicted) = first_conflict(g, uncoloured, &chosen) {
        if used >= budget {
            let partial = conflict_free_part(g, uncoloured, &chosen);
            let kept: std::collections::BTreeSet<EdgeId> =
                partial.iter().map(|&(e, _)| e).collect();
            return Err(CompletionFailure {
                phase: "resample_budget".into(),
                budget_used: used,
                residual_edges: uncoloured
                    .iter()
                    .filter(|e| !kept.contains(e))
                    .map(|&e| g.endpoints(e))
                    .collect(),
                partial,
            });
        }
        // Resample the closed neighbourhood of the conflicting edge.
        let [u, v] = g.endpoints(conflicted);
        let mut block: Vec<EdgeId> = vec![conflicted];
        for &w in [u, v].iter() {
            for &f in g.incident(w) {
                if f != conflicted && chosen.contains_key(&f) {
                    block.push(f);
                }
            }
        }
        block.sort_unstable();
        block.dedup();
        for e in block {
            let c = sample(e, &mut draw);
            chosen.insert(e, c);
            used += 1;
        }
    }
    Ok(chosen.into_iter().collect())
}

fn first_conflict(
    g: &Graph,
    uncoloured: &[EdgeId],
    chosen: &BTreeMap<EdgeId, u32>,
) -> Option<EdgeId> {
    let mut seen: BTreeMap<(Vertex, u32), EdgeId> = BTreeMap::new();
    for &e in uncoloured {
        let c = chosen[&e];
        let [u, v] = g.endpoints(e);
        for &w in [u, v].iter() {
            if let Some(&_first) = seen.get(&(w, c)) {
                return Some(e);
            }
            seen.insert((w, c), e);
        }
    }
    None
}

fn conflict_free_part(
    g: &Graph,
    uncoloured: &[EdgeId],
    chosen: &BTreeMap<EdgeId, u32>,
) -> Vec<(EdgeId, u32)> {
    let mut seen: BTreeMap<(Vertex, u32), ()> = BTreeMap::new();
    let mut kept = Vec::new();
    for &e in uncoloured {
        let c = chosen[&e];
        let [u, v] = g.endpoints(e);
        if seen.contains_key(&(u, c)) || seen.contains_key(&(v, c)) {
            continue;
        }
        seen.insert((u, c), ());
        seen.insert((v, c), ());
        kept.push((e, c));
    }
    kept
}

/// Merge the nibble colouring (read as base colours) with a completion into
/// one decomposition.
pub fn merge_decomposition(
    g: &Graph,
    gamma: &PartialColouring,
    completion: &[(EdgeId, u32)],
) -> Decomposition {
    let mut d = Decomposition::default();
    for (e, slot) in gamma.iter() {
        if let Some(c) = slot {
            d.classes.entry(c.base()).or_default().push(g.endpoints(e));
        }
    }
    for &(e, c) in completion {
        d.classes.entry(c).or_default().push(g.endpoints(e));
    }
    d.normalize();
    d
}

/// Merge and run the full verifier against the original base lists.
pub fn merge_and_verify(
    g: &Graph,
    gamma: &PartialColouring,
    completion: &[(EdgeId, u32)],
    lists: Option<&BaseLists>,
) -> (Decomposition, DecompositionReport) {
    let d = merge_decomposition(g, gamma, completion);
    let report = verify_decomposition(g, &d, lists);
    (d, report)
}

// ---------------------------------------------------------------------------
// Fallback: a proper edge colouring with at most Delta + 1 colours
// ---------------------------------------------------------------------------

/// Fan-rotation edge colouring. Returns one base colour per edge, using at
/// most `max_degree + 1` colours; every class is a matching.
pub fn proper_edge_colouring(g: &Graph) -> Vec<u32> {
    let palette = g.max_degree() + 1;
    let mut colour: Vec<Option<u32>> = vec![None; g.edge_count()];
    // used[v][c] = edge id carrying colour c at v
    let mut used: Vec<Vec<Option<EdgeId>>> =
        vec![vec![None; palette as usize]; g.vertex_count() as usize];

    let free_at = |used: &Vec<Vec<Option<EdgeId>>>, v: Vertex, c: u32| -> bool {
        used[v as usize][c as usize].is_none()
    };
    let first_free = |used: &Vec<Vec<Option<EdgeId>>>, v: Vertex| -> u32 {
        (0..palette)
            .find(|&c| free_at(used, v, c))
            .expect("degree <= Delta leaves a free colour")
    };

    for e0 in 0..g.edge_count() {
        let [u, v] = g.endpoints(e0);
        // Maximal fan of u starting at v: each next fan edge's colour is free
        // at the previous fan vertex.
        let mut fan_v: Vec<Vertex> = vec![v];
        let mut fan_e: Vec<EdgeId> = vec![e0];
        loop {
            let last = *fan_v.last().unwrap();
            let mut extended = false;
            for &f in g.incident(u) {
                if fan_e.contains(&f) {
                    continue;
                }
                if let Some(cf) = colour[f] {
                    if free_at(&used, last, cf) {
                        fan_v.push(g.other_endpoint(f, u));
                        fan_e.push(f);
                        extended = true;
                        break;
                    }
                }
            }
            if !extended {
                break;
            }
        }
        let c = first_free(&used, u);
        let d = first_free(&used, *fan_v.last().unwrap());

        let set = |colour: &mut Vec<Option<u32>>,
                   used: &mut Vec<Vec<Option<EdgeId>>>,
                   e: EdgeId,
                   col: u32| {
            let [a, b] = g.endpoints(e);
            colour[e] = Some(col);
            used[a as usize][col as usize] = Some(e);
            used[b as usize][col as usize] = Some(e);
        };
        let unset = |colour: &mut Vec<Option<u32>>,
                     used: &mut Vec<Vec<Option<EdgeId>>>,
                     e: EdgeId| {
            if let Some(col) = colour[e] {
                let [a, b] = g.endpoints(e);
                used[a as usize][col as usize] = None;
                used[b as usize][col as usize] = None;
                colour[e] = None;
            }
        };

        if !free_at(&used, u, d) {
            // Invert the maximal path from u alternating d, c, d, ...
            let mut x = u;
            let mut want = d;
            let mut path = Vec::new();
            while let Some(f) = used[x as usize][want as usize] {
                path.push(f);
                x = g.other_endpoint(f, x);
                want = if want == d { c } else { d };
            }
            // two-phase swap so the used table never holds stale entries
            let flipped: Vec<u32> = path
                .iter()
                .map(|&f| if colour[f] == Some(c) { d } else { c })
                .collect();
            for &f in &path {
                unset(&mut colour, &mut used, f);
            }
            for (&f, &col) in path.iter().zip(&flipped) {
                set(&mut colour, &mut used, f, col);
            }
        }
        debug_assert!(free_at(&used, u, d));

        // Rotate the longest fan prefix that is still a fan and whose last
        // vertex has d free.
        let mut w_idx = None;
        'scan: for j in 0..fan_v.len() {
            for i in 1..=j {
                let ci = colour[fan_e[i]].expect("fan edges are coloured");
                if !free_at(&used, fan_v[i - 1], ci) {
                    break 'scan;
                }
            }
            if free_at(&used, fan_v[j], d) {
                w_idx = Some(j);
                break;
            }
        }
        let j = w_idx.expect("fan rotation target exists");
        // shift each fan edge's colour one step towards the front, two-phase
        let shifted: Vec<u32> = fan_e[1..=j].iter().map(|&f| colour[f].unwrap()).collect();
        for &f in &fan_e[1..=j] {
            unset(&mut colour, &mut used, f);
        }
        for (i, &ci) in shifted.iter().enumerate() {
            set(&mut colour, &mut used, fan_e[i], ci);
        }
        debug_assert!(colour[fan_e[j]].is_none());
        set(&mut colour, &mut used, fan_e[j], d);
    }
    colour.into_iter().map(Option::unwrap).collect()
}
