//! Monte Carlo estimators validating the expectation and probability
//! formulas the iteration is tuned to.
//!
//! Every suite replays the real [`crate::nibble::run_iteration`] on a frozen
//! one-iteration state with per-trial substreams, measures the quantity at a
//! designated focus (edge / vertex / colour), and compares against the
//! formula target within `k` standard errors. Seeds are fixed by the caller,
//! so each report is a deterministic regression value.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::colour::{PartialColouring, TwinColour, TwinLists};
use crate::graph::{EdgeId, Graph, Vertex};
use crate::nibble::{run_iteration, IterRow, NibbleState};
use crate::paths::{is_dangerous, SuspiciousPath};
use crate::rng::{tags, StreamKey};

#[derive(Debug, Error)]
pub enum McError {
    #[error("instance: {0}")]
    Instance(String),
    #[error(transparent)]
    Nibble(#[from] crate::nibble::NibbleError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Equality,
    UpperBound,
    LowerBound,
}

#[derive(Clone, Debug, Serialize)]
pub struct McReport {
    pub quantity: String,
    pub trials: u64,
    pub estimate: f64,
    pub target: f64,
    pub sigma: f64,
    pub bound: BoundKind,
    pub k_sigma: f64,
    pub pass: bool,
}

impl McReport {
    /// Mean and standard error from per-trial samples; `sigma` is the sample
    /// standard deviation over `sqrt(trials)`.
    pub fn from_samples(
        quantity: &str,
        samples: &[f64],
        target: f64,
        bound: BoundKind,
        k_sigma: f64,
    ) -> Self {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
            / (n - 1.0).max(1.0);
        let sigma = (var / n).sqrt();
        let pass = match bound {
            BoundKind::Equality => (mean - target).abs() <= k_sigma * sigma,
            BoundKind::UpperBound => mean <= target + k_sigma * sigma,
            BoundKind::LowerBound => mean >= target - k_sigma * sigma,
        };
        McReport {
            quantity: quantity.into(),
            trials: samples.len() as u64,
            estimate: mean,
            target,
            sigma,
            bound,
            k_sigma,
            pass,
        }
    }
}

pub const DEFAULT_K_SIGMA: f64 = 4.0;

// ---------------------------------------------------------------------------
// Frozen instances
// ---------------------------------------------------------------------------

/// A frozen one-iteration state: graph, uniform twin lists, optional partial
/// colouring and reservations, the iteration constants, and the focus the
/// estimators measure at.
#[derive(Clone, Debug)]
pub struct FrozenInstance {
    pub graph: Graph,
    pub lists: TwinLists,
    pub gamma: PartialColouring,
    pub res_v: Vec<Vec<TwinColour>>,
    pub p: f64,
    pub ell: u32,
    pub log_delta: f64,
    pub big_l: f64,
    pub big_n: f64,
    pub big_r: f64,
    pub focus_edge: EdgeId,
    pub focus_vertex: Vertex,
    pub focus_colour: TwinColour,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    n: u32,
    edges: Vec<[u32; 2]>,
}

#[derive(Serialize, Deserialize)]
struct FocusDoc {
    edge: [u32; 2],
    vertex: u32,
    colour: TwinColour,
}

#[derive(Serialize, Deserialize)]
struct InstanceDoc {
    graph: GraphDoc,
    lists: BTreeMap<String, Vec<TwinColour>>,
    #[serde(default)]
    gamma: BTreeMap<String, TwinColour>,
    #[serde(default)]
    reserved: BTreeMap<String, Vec<TwinColour>>,
    p: f64,
    ell: u32,
    log_delta: f64,
    big_l: f64,
    big_n: f64,
    big_r: f64,
    focus: FocusDoc,
}

fn edge_key_to_id(g: &Graph, key: &str) -> Result<EdgeId, McError> {
    let parts: Vec<&str> = key.split('-').collect();
    if parts.len() != 2 {
        return Err(McError::Instance(format!("bad edge key {key:?}")));
    }
    let u: u32 = parts[0]
        .trim()
        .parse()
        .map_err(|_| McError::Instance(format!("bad edge key {key:?}")))?;
    let v: u32 = parts[1]
        .trim()
        .parse()
        .map_err(|_| McError::Instance(format!("bad edge key {key:?}")))?;
    g.edge_between(u, v)
        .ok_or_else(|| McError::Instance(format!("no edge ({u},{v})")))
}

impl FrozenInstance {
    pub fn from_json(text: &str) -> Result<Self, McError> {
        let doc: InstanceDoc =
            serde_json::from_str(text).map_err(|e| McError::Instance(e.to_string()))?;
        let graph = Graph::new(doc.graph.n, &doc.graph.edges)
            .map_err(|e| McError::Instance(e.to_string()))?;
        let mut lists: TwinLists = vec![Vec::new(); graph.edge_count()];
        for (key, mut colours) in doc.lists {
            let e = edge_key_to_id(&graph, &key)?;
            colours.sort_unstable();
            colours.dedup();
            lists[e] = colours;
        }
        let mut gamma = PartialColouring::empty(graph.edge_count());
        for (key, c) in doc.gamma {
            gamma.set(edge_key_to_id(&graph, &key)?, c);
        }
        let mut res_v = vec![Vec::new(); graph.vertex_count() as usize];
        for (key, mut colours) in doc.reserved {
            let v: u32 = key
                .trim()
                .parse()
                .map_err(|_| McError::Instance(format!("bad vertex key {key:?}")))?;
            if v >= graph.vertex_count() {
                return Err(McError::Instance(format!("vertex {v} out of range")));
            }
            colours.sort_unstable();
            colours.dedup();
            res_v[v as usize] = colours;
        }
        let focus_edge = graph
            .edge_between(doc.focus.edge[0], doc.focus.edge[1])
            .ok_or_else(|| McError::Instance("focus edge not in graph".into()))?;
        let inst = FrozenInstance {
            graph,
            lists,
            gamma,
            res_v,
            p: doc.p,
            ell: doc.ell,
            log_delta: doc.log_delta,
            big_l: doc.big_l,
            big_n: doc.big_n,
            big_r: doc.big_r,
            focus_edge,
            focus_vertex: doc.focus.vertex,
            focus_colour: doc.focus.colour,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json(&self) -> String {
        let g = &self.graph;
        let key = |e: EdgeId| {
            let [u, v] = g.endpoints(e);
            format!("{u}-{v}")
        };
        let doc = InstanceDoc {
            graph: GraphDoc {
                n: g.vertex_count(),
                edges: g.edges().to_vec(),
            },
            lists: (0..g.edge_count())
                .map(|e| (key(e), self.lists[e].clone()))
                .collect(),
            gamma: self
                .gamma
                .iter()
                .filter_map(|(e, c)| c.map(|c| (key(e), c)))
                .collect(),
            reserved: self
                .res_v
                .iter()
                .enumerate()
                .filter(|(_, l)| !l.is_empty())
                .map(|(v, l)| (v.to_string(), l.clone()))
                .collect(),
            p: self.p,
            ell: self.ell,
            log_delta: self.log_delta,
            big_l: self.big_l,
            big_n: self.big_n,
            big_r: self.big_r,
            focus: FocusDoc {
                edge: g.endpoints(self.focus_edge),
                vertex: self.focus_vertex,
                colour: self.focus_colour,
            },
        };
        serde_json::to_string_pretty(&doc).unwrap()
    }

    /// Uniform uncoloured list sizes matching `big_l`, neighbourhood counts
    /// within `big_n`, focus within range.
    pub fn validate(&self) -> Result<(), McError> {
        let g = &self.graph;
        for e in 0..g.edge_count() {
            if !self.gamma.is_coloured(e) && self.lists[e].len() as f64 != self.big_l {
                return Err(McError::Instance(format!(
                    "uncoloured edge {e} has list size {} != L = {}",
                    self.lists[e].len(),
                    self.big_l
                )));
            }
        }
        let state = self.state();
        let view = state.view();
        let n_max = crate::paths::max_colour_neighbourhood(view);
        if (n_max as f64) > self.big_n {
            return Err(McError::Instance(format!(
                "max colour neighbourhood {n_max} exceeds N = {}",
                self.big_n
            )));
        }
        if self.big_n >= self.big_l {
            return Err(McError::Instance("need L > N".into()));
        }
        if self.gamma.is_coloured(self.focus_edge) {
            return Err(McError::Instance("focus edge must be uncoloured".into()));
        }
        if self.focus_vertex >= g.vertex_count() {
            return Err(McError::Instance("focus vertex out of range".into()));
        }
        Ok(())
    }

    pub fn state(&self) -> NibbleState<'_> {
        NibbleState {
            graph: &self.graph,
            res_v: &self.res_v,
            gamma: self.gamma.clone(),
            lists: self.lists.clone(),
            row: self.row(),
            p: self.p,
            ell: self.ell,
            i: 0,
        }
    }

    pub fn row(&self) -> IterRow {
        IterRow::derive(self.p, self.big_l, self.big_n, self.big_r)
    }

    /// Colour neighbourhood of the focus (vertex, colour) in the frozen state.
    fn focus_members(&self) -> Vec<EdgeId> {
        let state = self.state();
        crate::paths::colour_neighbours(state.view(), self.focus_vertex, self.focus_colour).edges
    }
}

/// Built-in frozen instances for the regression suites.
pub fn builtin_instance(name: &str) -> Result<FrozenInstance, McError> {
    let c = TwinColour::new;
    match name {
        // Star with four spokes, uniform 8-colour twin lists, no colouring.
        "star4" => {
            let graph = Graph::star(4);
            let bases: Vec<u32> = (0..4).collect();
            let lists = crate::colour::product_lists(&vec![bases; graph.edge_count()]);
            let mut res_v = vec![Vec::new(); graph.vertex_count() as usize];
            for v in 1..=4u32 {
                res_v[v as usize] = vec![c(9, 1), c(9, 2)];
            }
            let inst = FrozenInstance {
                graph,
                lists,
                gamma: PartialColouring::empty(4),
                res_v,
                p: 0.25,
                ell: 4,
                log_delta: 4.0f64.ln(),
                big_l: 8.0,
                big_n: 4.0,
                big_r: 4.0,
                focus_edge: 0,
                focus_vertex: 0,
                focus_colour: c(0, 1),
            };
            inst.validate()?;
            Ok(inst)
        }
        // Six-cycle with two chords, a twin-coloured segment, and base 4
        // reserved at vertices 4 and 5: every tracked quantity is nonzero.
        "mixed" => {
            let graph = Graph::new(
                6,
                &[[0, 1], [1, 2], [2, 3], [3, 4], [4, 5], [0, 5], [0, 3], [1, 4]],
            )
            .unwrap();
            let bases: Vec<u32> = (0..5).collect();
            let mut lists = crate::colour::product_lists(&vec![bases; graph.edge_count()]);
            let mut gamma = PartialColouring::empty(graph.edge_count());
            // colour a 2-edge alternating segment away from the focus edge
            let e23 = graph.edge_between(2, 3).unwrap();
            let e34 = graph.edge_between(3, 4).unwrap();
            gamma.set(e23, c(0, 2));
            gamma.set(e34, c(0, 1));
            let res_pair = [c(4, 1), c(4, 2)];
            let mut res_v = vec![Vec::new(); 6];
            res_v[4] = res_pair.to_vec();
            res_v[5] = res_pair.to_vec();
            // drop colours used at an endpoint and colours reserved at an
            // endpoint, then pad back to uniform size with fresh bases
            let pad = [c(7, 1), c(7, 2), c(8, 1), c(8, 2), c(9, 1), c(9, 2)];
            for (e, list) in lists.iter_mut().enumerate() {
                if gamma.is_coloured(e) {
                    continue;
                }
                let [u, v] = graph.endpoints(e);
                let mut drop: Vec<TwinColour> = Vec::new();
                for (w, used) in [(2, c(0, 2)), (3, c(0, 2)), (3, c(0, 1)), (4, c(0, 1))] {
                    if u == w || v == w {
                        drop.push(used);
                    }
                }
                if u == 4 || v == 4 || u == 5 || v == 5 {
                    drop.extend(res_pair);
                }
                drop.sort_unstable();
                drop.dedup();
                let mut pad_iter = pad.iter();
                for d in drop {
                    if let Ok(idx) = list.binary_search(&d) {
                        list.remove(idx);
                        let fresh = *pad_iter.next().unwrap();
                        if let Err(pos) = list.binary_search(&fresh) {
                            list.insert(pos, fresh);
                        }
                    }
                }
            }
            let inst = FrozenInstance {
                graph,
                lists,
                gamma,
                res_v,
                p: 0.25,
                ell: 4,
                log_delta: 4.0f64.ln(),
                big_l: 10.0,
                big_n: 4.0,
                big_r: 1.0,
                focus_edge: 0, // edge (0,1)
                focus_vertex: 0,
                focus_colour: c(1, 1),
            };
            inst.validate()?;
            Ok(inst)
        }
        _ => Err(McError::Instance(format!(
            "unknown builtin instance {name:?} (have: star4, mixed)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// Trial running
// ---------------------------------------------------------------------------

/// Run per-trial closures over fixed-index substreams, optionally chunked
/// across threads. Aggregation is by trial index, so the result is identical
/// for every thread count.
pub fn run_trials<T: Send>(
    trials: u64,
    threads: usize,
    f: impl Fn(u64) -> T + Sync,
) -> Vec<T> {
    let threads = threads.max(1);
    if threads == 1 {
        return (0..trials).map(f).collect();
    }
    let mut out: Vec<Option<T>> = (0..trials).map(|_| None).collect();
    let chunk = trials.div_ceil(threads as u64).max(1);
    std::thread::scope(|scope| {
        for (tid, slot) in out.chunks_mut(chunk as usize).enumerate() {
            let f = &f;
            scope.spawn(move || {
                let base = tid as u64 * chunk;
                for (off, cell) in slot.iter_mut().enumerate() {
                    *cell = Some(f(base + off as u64));
                }
            });
        }
    });
    out.into_iter().map(Option::unwrap).collect()
}

fn trial_outcome(
    inst: &FrozenInstance,
    key: StreamKey,
    t: u64,
) -> crate::nibble::IterationOutcome {
    let state = inst.state();
    run_iteration(&state, key.child(tags::TRIAL).child(t))
        .expect("frozen instance satisfies the coin-flip domains")
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

/// The (vertex, colour) pair with the largest reserved set, so the
/// reserved-tracking estimates measure something nonvacuous; falls back to
/// the focus pair when nothing is reserved.
fn reserved_focus(inst: &FrozenInstance) -> (Vertex, TwinColour) {
    let tracker = crate::nibble::reserved_tracker(&inst.graph, &inst.res_v, &inst.gamma);
    tracker
        .iter()
        .max_by_key(|(_, edges)| edges.len())
        .map(|(&k, _)| k)
        .unwrap_or((inst.focus_vertex, inst.focus_colour))
}

/// Retention: the focus edge is coloured after conflict resolution with
/// probability exactly `p * retain^2`; conditioned on assignment the
/// frequency is exactly `retain^2`; the reserved set shrinks in expectation
/// to at most `R * keep`.
pub fn mc_retention(
    inst: &FrozenInstance,
    trials: u64,
    key: StreamKey,
    threads: usize,
) -> Vec<McReport> {
    let row = inst.row();
    let (res_vertex, res_colour) = reserved_focus(inst);
    let per_trial = run_trials(trials, threads, |t| {
        let out = trial_outcome(inst, key, t);
        let assigned = out.assigned[inst.focus_edge].is_some();
        let kept = out.newly_retained[inst.focus_edge].is_some();
        let r_prime = reserved_size_at(inst, &out.gamma_prime, res_vertex, res_colour);
        (assigned, kept, r_prime as f64)
    });
    let coloured: Vec<f64> = per_trial
        .iter()
        .map(|&(_, kept, _)| f64::from(kept))
        .collect();
    let conditional: Vec<f64> = per_trial
        .iter()
        .filter(|&&(assigned, _, _)| assigned)
        .map(|&(_, kept, _)| f64::from(kept))
        .collect();
    let reserved: Vec<f64> = per_trial.iter().map(|&(_, _, r)| r).collect();
    let retain2 = row.retain * row.retain;
    vec![
        McReport::from_samples(
            "edge_coloured_after_conflicts",
            &coloured,
            inst.p * retain2,
            BoundKind::Equality,
            DEFAULT_K_SIGMA,
        ),
        McReport::from_samples(
            "conditional_retention",
            &conditional,
            retain2,
            BoundKind::Equality,
            DEFAULT_K_SIGMA,
        ),
        McReport::from_samples(
            "reserved_set_after_step",
            &reserved,
            inst.big_r * row.keep,
            BoundKind::UpperBound,
            DEFAULT_K_SIGMA,
        ),
    ]
}

fn reserved_size_at(
    inst: &FrozenInstance,
    gamma: &PartialColouring,
    v: Vertex,
    c: TwinColour,
) -> usize {
    inst.graph
        .incident(v)
        .iter()
        .filter(|&&e| {
            !gamma.is_coloured(e)
                && inst.res_v[inst.graph.other_endpoint(e, v) as usize]
                    .binary_search(&c)
                    .is_ok()
        })
        .count()
}

/// List sizes after the update step stay at `L * keep^2` in expectation, and
/// a colour survives step IV at a single endpoint with probability exactly
/// `keep`.
pub fn mc_list_keep(
    inst: &FrozenInstance,
    trials: u64,
    key: StreamKey,
    threads: usize,
) -> Vec<McReport> {
    let row = inst.row();
    let per_trial = run_trials(trials, threads, |t| {
        let out = trial_outcome(inst, key, t);
        let size = out.lists_prime[inst.focus_edge].len() as f64;
        let survived = !out
            .endpoint_strikes
            .contains(&(inst.focus_vertex, inst.focus_colour));
        (size, f64::from(survived))
    });
    let sizes: Vec<f64> = per_trial.iter().map(|&(s, _)| s).collect();
    let keeps: Vec<f64> = per_trial.iter().map(|&(_, k)| k).collect();
    vec![
        McReport::from_samples(
            "list_size_after_update",
            &sizes,
            inst.big_l * row.keep * row.keep,
            BoundKind::LowerBound,
            DEFAULT_K_SIGMA,
        ),
        McReport::from_samples(
            "endpoint_keep",
            &keeps,
            row.keep,
            BoundKind::Equality,
            DEFAULT_K_SIGMA,
        ),
    ]
}

/// The retention-blind neighbourhood `N*(v,c)`: members that do not retain a
/// colour and whose far endpoint sees no retained copy of `c`. Bounded by
/// `N keep (1 - p retain^2) + 1`, and a superset of `N'(v,c)` in every trial.
pub fn mc_nstar(
    inst: &FrozenInstance,
    trials: u64,
    key: StreamKey,
    threads: usize,
) -> Vec<McReport> {
    let row = inst.row();
    let members = inst.focus_members();
    let state = inst.state();
    let far_members: Vec<(EdgeId, Vec<EdgeId>)> = members
        .iter()
        .map(|&e| {
            let far = inst.graph.other_endpoint(e, inst.focus_vertex);
            let far_nbhd =
                crate::paths::colour_neighbours(state.view(), far, inst.focus_colour).edges;
            (e, far_nbhd)
        })
        .collect();
    let per_trial = run_trials(trials, threads, |t| {
        let out = trial_outcome(inst, key, t);
        let mut star = Vec::new();
        for (e, far_nbhd) in &far_members {
            let own_retained = out.newly_retained[*e].is_some();
            let far_retained = far_nbhd
                .iter()
                .any(|&f| out.newly_retained[f] == Some(inst.focus_colour));
            if !own_retained && !far_retained {
                star.push(*e);
            }
        }
        // N'(v,c) under (gamma', L') must be contained in N*(v,c)
        let subset_ok = members.iter().all(|&e| {
            let in_prime = !out.gamma_prime.is_coloured(e)
                && out.lists_prime[e].binary_search(&inst.focus_colour).is_ok();
            !in_prime || star.contains(&e)
        });
        (star.len() as f64, f64::from(subset_ok))
    });
    let sizes: Vec<f64> = per_trial.iter().map(|&(s, _)| s).collect();
    let subset: Vec<f64> = per_trial.iter().map(|&(_, ok)| ok).collect();
    let shrink = 1.0 - inst.p * row.retain * row.retain;
    vec![
        McReport::from_samples(
            "nstar_size",
            &sizes,
            inst.big_n * row.keep * shrink + 1.0,
            BoundKind::UpperBound,
            DEFAULT_K_SIGMA,
        ),
        McReport::from_samples(
            "nstar_contains_next_nbhd",
            &subset,
            1.0,
            BoundKind::Equality,
            DEFAULT_K_SIGMA,
        ),
    ]
}

/// The step-V tallies at the focus: colours struck from the focus edge,
/// neighbourhood members with a realized path, reserved members with a
/// realized path — against `4p`, `4p` and `4p ln Delta`.
pub fn mc_danger(
    inst: &FrozenInstance,
    trials: u64,
    key: StreamKey,
    threads: usize,
) -> Vec<McReport> {
    let (res_vertex, res_colour) = reserved_focus(inst);
    let per_trial = run_trials(trials, threads, |t| {
        let out = trial_outcome(inst, key, t);
        let x = out
            .tallies
            .x
            .get(&inst.focus_edge)
            .map_or(0, Vec::len) as f64;
        let y = out
            .tallies
            .y
            .get(&(inst.focus_vertex, inst.focus_colour))
            .map_or(0, Vec::len) as f64;
        let z = out
            .tallies
            .z
            .get(&(res_vertex, res_colour))
            .map_or(0, Vec::len) as f64;
        (x, y, z)
    });
    let xs: Vec<f64> = per_trial.iter().map(|&(x, _, _)| x).collect();
    let ys: Vec<f64> = per_trial.iter().map(|&(_, y, _)| y).collect();
    let zs: Vec<f64> = per_trial.iter().map(|&(_, _, z)| z).collect();
    vec![
        McReport::from_samples(
            "struck_colours_per_edge",
            &xs,
            4.0 * inst.p,
            BoundKind::UpperBound,
            DEFAULT_K_SIGMA,
        ),
        McReport::from_samples(
            "realized_members_per_nbhd",
            &ys,
            4.0 * inst.p,
            BoundKind::UpperBound,
            DEFAULT_K_SIGMA,
        ),
        McReport::from_samples(
            "realized_members_per_reserved",
            &zs,
            4.0 * inst.p * inst.log_delta,
            BoundKind::UpperBound,
            DEFAULT_K_SIGMA,
        ),
    ]
}

/// Frequency with which one fixed suspicious path of uncoloured length `k`
/// becomes dangerous under activation probability `p` and uniform lists of
/// size `list_size`: target `(p / list_size)^k`, sigma from the Bernoulli
/// target itself.
pub fn mc_path_danger(
    p: f64,
    list_size: usize,
    k: usize,
    trials: u64,
    key: StreamKey,
    threads: usize,
) -> Result<McReport, McError> {
    if !(0.0..=1.0).contains(&p) || list_size == 0 || k == 0 {
        return Err(McError::Instance("need 0<=p<=1, L>=1, k>=1".into()));
    }
    // Path with k uncoloured edges; even k gets one pre-coloured pad edge so
    // the full pattern ends with the twin colour on an odd position.
    let pad = k.is_multiple_of(2);
    let edge_count = if pad { k + 1 } else { k };
    let graph = Graph::path(edge_count as u32 + 1);
    let query = TwinColour::new(0, 1);
    let mut gamma = PartialColouring::empty(edge_count);
    if pad {
        gamma.set(edge_count - 1, query.twin()); // odd position carries the twin
    }
    let mut lists: TwinLists = vec![Vec::new(); edge_count];
    for (e, list) in lists.iter_mut().enumerate().take(k) {
        let pos = e + 1;
        let required = if pos % 2 == 1 { query.twin() } else { query };
        list.push(required);
        let mut filler = 1u32;
        while list.len() < list_size {
            let cand = TwinColour::new(filler, 1);
            if *list.last().unwrap() != cand {
                list.push(cand);
            }
            filler += 1;
        }
        list.sort_unstable();
    }
    if pad {
        lists[edge_count - 1] = Vec::new(); // coloured edge, list unused
    }
    let path = SuspiciousPath {
        vertices: (0..=edge_count as u32).collect(),
        uncoloured_len: k,
    };
    let res_v = vec![Vec::new(); graph.vertex_count() as usize];
    let big_n = 2.0f64.min(list_size as f64 - 1.0).max(1.0);
    let inst = FrozenInstance {
        graph,
        lists,
        gamma,
        res_v,
        p,
        ell: (k + 2) as u32,
        log_delta: 2.0f64.ln(),
        big_l: list_size as f64,
        big_n,
        big_r: 0.0,
        focus_edge: 0,
        focus_vertex: 0,
        focus_colour: query,
    };
    let g = inst.graph.clone();
    let end = edge_count as u32;
    let samples = run_trials(trials, threads, |t| {
        let out = trial_outcome(&inst, key, t);
        let mut after = inst.gamma.clone();
        for (e, slot) in out.assigned.iter().enumerate() {
            if let Some(c) = slot {
                after.set(e, *c);
            }
        }
        f64::from(is_dangerous(&path, &g, &after, 0, end, query))
    });
    let target = (p / list_size as f64).powi(k as i32);
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let sigma = (target * (1.0 - target) / n).sqrt();
    let pass = (mean - target).abs() <= DEFAULT_K_SIGMA * sigma;
    Ok(McReport {
        quantity: format!("path_danger_p{p}_L{list_size}_k{k}"),
        trials,
        estimate: mean,
        target,
        sigma,
        bound: BoundKind::Equality,
        k_sigma: DEFAULT_K_SIGMA,
        pass,
    })
}
