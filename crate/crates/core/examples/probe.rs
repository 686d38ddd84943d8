//! Dev probe: schedule truth tables and desk-scale nibble behaviour.
use linfor::corpus::{random_lists, random_near_regular};
use linfor::nibble::{run_nibble, NibbleConfig};
use linfor::schedule::{build_schedule, build_untainted, check_schedule_bounds, check_untainted_relations, ScheduleParams};
use linfor::rng::StreamKey;

fn main() {
    let mode = std::env::args().nth(1).unwrap_or_else(|| "schedule".into());
    match mode.as_str() {
        "schedule" => {
            for exp in [15.0, 20.0, 30.0, 40.0] {
                let params = ScheduleParams::from_exponent(exp, 0.25).unwrap();
                let s = build_schedule(params).unwrap();
                let rows = build_untainted(&s);
                println!("== delta = e^{exp}: i0 = {}, rows = {}", s.i0, s.rows.len());
                let last = s.rows.last().unwrap();
                println!("   terminal: L={:.6e} N={:.6e} R={:.6e} (ln^7={:.6e})", last.big_l, last.big_n, last.big_r, exp.powi(7));
                for f in check_schedule_bounds(&s).families {
                    println!("   {}: {} {}", f.id, if f.pass { "PASS" } else { "FAIL" }, f.failures.first().map(String::as_str).unwrap_or(""));
                }
                for f in check_untainted_relations(&s, &rows).families {
                    println!("   untainted {}: {} {}", f.id, if f.pass { "PASS" } else { "FAIL" }, f.failures.first().map(String::as_str).unwrap_or(""));
                }
                // golden row 1 values for e20
                if exp == 20.0 {
                    let r1 = s.rows[1];
                    println!("   row1: L={:.17e} N={:.17e} R={:.17e} retain={:.17} keep={:.17}", r1.big_l, r1.big_n, r1.big_r, r1.retain, r1.keep);
                }
            }
        }
        "nibble" => {
            let n: u32 = std::env::args().nth(2).map(|s| s.parse().unwrap()).unwrap_or(200);
            let d: u32 = std::env::args().nth(3).map(|s| s.parse().unwrap()).unwrap_or(16);
            let bases: u32 = std::env::args().nth(4).map(|s| s.parse().unwrap()).unwrap_or(2 * d);
            let mut ok = 0;
            for seed in 0..10u64 {
                let g = random_near_regular(n, d, StreamKey::root(42).child(seed));
                let lists = vec![(0..bases).collect::<Vec<u32>>(); g.edge_count()];
                let t0 = std::time::Instant::now();
                let cfg = NibbleConfig::empirical();
                match run_nibble(&g, &lists, &cfg, seed) {
                    Ok(run) => {
                        ok += 1;
                        let frac = run.gamma.coloured_count() as f64 / g.edge_count() as f64;
                        println!("seed {seed}: n={n} m={} delta={} iters={} restarts={} coloured={:.1}% stop={:?} [{:?}]",
                            g.edge_count(), g.max_degree(), run.iterations, run.total_restarts, 100.0*frac, run.stop_reason, t0.elapsed());
                    }
                    Err(e) => println!("seed {seed}: ERR {e} [{:?}]", t0.elapsed()),
                }
            }
            println!("ok: {ok}/10");
        }
        "lists" => {
            let g = random_near_regular(60, 10, StreamKey::root(1));
            let lists = random_lists(&g, 40, 24, StreamKey::root(2));
            let cfg = NibbleConfig::empirical();
            match run_nibble(&g, &lists, &cfg, 3) {
                Ok(run) => println!("list-mode: coloured {}/{} iters={} stop={:?}", run.gamma.coloured_count(), g.edge_count(), run.iterations, run.stop_reason),
                Err(e) => println!("list-mode ERR: {e}"),
            }
        }
        _ => eprintln!("unknown probe"),
    }
}
