//! Dev probe: end-to-end pipeline over a criterion-1-like corpus.
use linfor::corpus::{random_gnm, random_lists, random_near_regular};
use linfor::pipeline::{run_pipeline, PipelineConfig};
use linfor::rng::StreamKey;

fn main() {
    let count: u64 = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(200);
    let t0 = std::time::Instant::now();
    let mut verified = 0u32;
    let mut fallback = 0u32;
    let mut budget = 0u32;
    let mut errs = 0u32;
    let mut finisher_completed = 0u32;
    for i in 0..count {
        let key = StreamKey::root(777).child(i);
        let style = i % 4;
        let (g, lists) = match style {
            0 => {
                let n = 8 + (i % 41) as u32;
                let m = (n as usize * (1 + i as usize % 3)).min(n as usize * (n as usize - 1) / 2);
                (random_gnm(n, m, key), None)
            }
            1 => {
                let n = 10 + (i % 31) as u32;
                let d = 4 + (i % 9) as u32;
                (random_near_regular(n, d, key), None)
            }
            2 => {
                let n = 10 + (i % 31) as u32;
                let d = 4 + (i % 7) as u32;
                let g = random_near_regular(n, d, key);
                let delta = g.max_degree();
                let lists = random_lists(&g, 10 * delta, (8 * delta) as usize, key.child(9));
                (g, Some(lists))
            }
            _ => {
                let n = 8 + (i % 25) as u32;
                let m = (2 * n as usize).min(n as usize * (n as usize - 1) / 2);
                let g = random_gnm(n, m, key);
                let delta = g.max_degree();
                let lists = random_lists(&g, 12 * delta, (9 * delta) as usize, key.child(9));
                (g, Some(lists))
            }
        };
        let cfg = PipelineConfig::empirical(1000 + i);
        match run_pipeline(&g, lists.as_ref(), &cfg) {
            Ok(out) => {
                if out.info.verified { verified += 1; } 
                if out.info.fallback_used { fallback += 1; }
                if out.budget_exhausted { budget += 1; }
                if out.info.completion_phase == "completed" && out.info.residual_edges > 0 { finisher_completed += 1; }
                if !out.report.passes() && !out.budget_exhausted {
                    println!("instance {i}: UNVERIFIED non-budget!: {:?}", out.report);
                }
            }
            Err(e) => { errs += 1; println!("instance {i}: ERR {e}"); }
        }
    }
    println!("corpus {count}: verified={verified} fallback={fallback} budget_exhausted={budget} errs={errs} finisher_completed={finisher_completed} [{:?}]", t0.elapsed());
}
