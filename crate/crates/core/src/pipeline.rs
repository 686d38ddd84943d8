//! End-to-end decomposition: reserve colours, run the nibble, complete the
//! residual graph from the reserved lists, merge and verify.
//!
//! Without user lists the pipeline runs in uniform-colour mode: every edge
//! gets the same synthetic base palette, and on completion failure it falls
//! back to a plain proper edge colouring into at most `Delta + 1` matchings,
//! so a valid (if larger) decomposition is always produced.

use serde::Serialize;
use thiserror::Error;

use crate::colour::{
    verify_decomposition, BaseLists, Decomposition, DecompositionReport,
};
use crate::finisher::{
    check_finisher_precondition, complete_colouring, merge_and_verify, proper_edge_colouring,
    transpose_reserve, FinisherPrecondition,
};
use crate::graph::Graph;
use crate::nibble::{run_nibble, NibbleConfig, NibbleError, NibbleRun, TranscriptRow};
use crate::rng::StreamKey;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Nibble(#[from] NibbleError),
}

#[derive(Clone, Debug, Serialize)]
pub struct PipelineInfo {
    pub mode: String,
    pub p: f64,
    pub ell: u32,
    pub delta: u32,
    pub seed: u64,
    pub uniform_colours: Option<u32>,
    pub reservation_attempts: u32,
    pub iterations: u32,
    pub total_restarts: u32,
    pub stop_reason: String,
    pub nibble_coloured: usize,
    pub residual_edges: usize,
    pub precondition: FinisherPrecondition,
    pub completion_phase: String,
    pub completion_budget_used: u64,
    pub fallback_used: bool,
    pub num_classes: usize,
    pub verified: bool,
}

pub struct PipelineOutcome {
    pub decomposition: Decomposition,
    pub report: DecompositionReport,
    pub transcript: Vec<TranscriptRow>,
    pub info: PipelineInfo,
    /// Completion failure details, when the finisher gave up.
    pub failure: Option<crate::finisher::CompletionFailure>,
    /// Set when the finisher ran out of budget in list mode: the emitted
    /// decomposition is partial.
    pub budget_exhausted: bool,
}

pub struct PipelineConfig {
    pub nibble: NibbleConfig,
    pub seed: u64,
    /// Base palette size for uniform mode; defaults to `max(4, 2 * Delta)`.
    pub uniform_colours: Option<u32>,
}

impl PipelineConfig {
    pub fn empirical(seed: u64) -> Self {
        PipelineConfig {
            nibble: NibbleConfig::empirical(),
            seed,
            uniform_colours: None,
        }
    }
}

pub fn run_pipeline(
    g: &Graph,
    user_lists: Option<&BaseLists>,
    cfg: &PipelineConfig,
) -> Result<PipelineOutcome, PipelineError> {
    let uniform = user_lists.is_none();
    let palette = cfg.uniform_colours.unwrap_or_else(|| (12 * g.max_degree()).max(4));
    let synthetic: BaseLists;
    let base_lists: &BaseLists = match user_lists {
        Some(l) => l,
        None => {
            synthetic = vec![(0..palette).collect(); g.edge_count()];
            &synthetic
        }
    };
    let run: NibbleRun = run_nibble(g, base_lists, &cfg.nibble, cfg.seed)?;

    let residual: Vec<usize> = (0..g.edge_count())
        .filter(|&e| !run.gamma.is_coloured(e))
        .collect();
    let reserve_prime = transpose_reserve(&run.reservation.res_e);
    let precondition = check_finisher_precondition(g, &residual, &reserve_prime);
    let budget = cfg.nibble.targets.finisher_budget.unwrap_or(10_000);
    let finish_key = StreamKey::root(cfg.seed).child(0x0f17);

    let verify_lists = user_lists;
    let mut fallback_used = false;
    let mut budget_exhausted = false;
    let mut failure_info = None;
    let (decomposition, report, completion_phase, completion_budget_used);
    match complete_colouring(g, &residual, &reserve_prime, finish_key, budget) {
        Ok(completion) => {
            let (d, r) = merge_and_verify(g, &run.gamma, &completion, verify_lists);
            decomposition = d;
            report = r;
            completion_phase = "completed".to_string();
            completion_budget_used = 0;
        }
        Err(failure) => {
            completion_phase = failure.phase.clone();
            completion_budget_used = failure.budget_used;
            if uniform {
                // Synthetic palette: finish the residual with fresh colours
                // instead. A proper edge colouring of the residual subgraph
                // splits it into matchings, and fresh colours cannot touch
                // the nibble classes, so the merge stays cycle-free.
                fallback_used = true;
                let residual_pairs: Vec<[u32; 2]> =
                    residual.iter().map(|&e| g.endpoints(e)).collect();
                let sub = Graph::new(g.vertex_count(), &residual_pairs)
                    .expect("residual subgraph of a valid graph");
                let sub_colours = proper_edge_colouring(&sub);
                let completion: Vec<(usize, u32)> = (0..sub.edge_count())
                    .map(|se| {
                        let [u, v] = sub.endpoints(se);
                        let e = g.edge_between(u, v).unwrap();
                        (e, palette + sub_colours[se])
                    })
                    .collect();
                let (d, r) = merge_and_verify(g, &run.gamma, &completion, None);
                if r.passes() {
                    decomposition = d;
                    report = r;
                } else {
                    // last resort: a full recolour into at most Delta + 1
                    // matchings is always a valid decomposition
                    let colours = proper_edge_colouring(g);
                    let mut d = Decomposition::default();
                    for (e, &c) in colours.iter().enumerate() {
                        d.classes.entry(c).or_default().push(g.endpoints(e));
                    }
                    d.normalize();
                    let r = verify_decomposition(g, &d, None);
                    decomposition = d;
                    report = r;
                }
            } else {
                budget_exhausted = true;
                let (d, r) = merge_and_verify(g, &run.gamma, &failure.partial, verify_lists);
                decomposition = d;
                report = r;
            }
            failure_info = Some(failure);
        }
    }

    let verified = report.passes() && !budget_exhausted;
    let info = PipelineInfo {
        mode: match cfg.nibble.mode {
            crate::nibble::NibbleMode::Strict => "strict".into(),
            crate::nibble::NibbleMode::Empirical => "empirical".into(),
        },
        p: cfg.nibble.p,
        ell: run.ell,
        delta: g.max_degree(),
        seed: cfg.seed,
        uniform_colours: if uniform { Some(palette) } else { None },
        reservation_attempts: run.reservation.attempts,
        iterations: run.iterations,
        total_restarts: run.total_restarts,
        stop_reason: run.stop_reason.clone(),
        nibble_coloured: run.gamma.coloured_count(),
        residual_edges: residual.len(),
        precondition,
        completion_phase,
        completion_budget_used,
        fallback_used,
        num_classes: decomposition.num_classes(),
        verified,
    };
    Ok(PipelineOutcome {
        decomposition,
        report,
        transcript: run.transcript,
        info,
        failure: failure_info,
        budget_exhausted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_pipeline_on_small_path_verifies() {
        let g = Graph::path(6);
        let cfg = PipelineConfig::empirical(7);
        let out = run_pipeline(&g, None, &cfg).unwrap();
        assert!(out.report.passes(), "{:?}", out.report);
        assert!(out.info.verified);
    }

    #[test]
    fn generous_lists_pipeline_verifies_against_lists() {
        let g = Graph::cycle(8);
        let lists: BaseLists = vec![(0..8).collect(); g.edge_count()];
        let cfg = PipelineConfig::empirical(3);
        let out = run_pipeline(&g, Some(&lists), &cfg).unwrap();
        if out.info.verified {
            assert!(out.report.list_violations.is_empty());
            assert!(out.report.passes());
        }
    }
}
