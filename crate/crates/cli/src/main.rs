//! Command-line front end: decompose graphs into linear forests, verify
//! decompositions, evaluate the parameter schedule, run the exact oracles and
//! the Monte Carlo suites.
//!
//! Exit codes: 0 success/verified, 2 input or parse error, 3 restart or
//! budget exhaustion (partial artifacts are still written), 4 internal
//! verification failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use linfor::colour::{parse_base_lists, Decomposition, TwinColour};
use linfor::graph::Graph;
use linfor::mc::{builtin_instance, mc_danger, mc_list_keep, mc_nstar, mc_retention, FrozenInstance, McReport};
use linfor::nibble::{NibbleConfig, NibbleError, NibbleMode, Targets, TranscriptRow};
use linfor::oracle::{brute_force_list_2colouring, conjecture_scan, exact_decomposition, exact_linear_arboricity};
use linfor::paths::{danger_set, StateView};
use linfor::pipeline::{run_pipeline, PipelineConfig, PipelineError};
use linfor::rng::StreamKey;
use linfor::schedule::{build_schedule, build_untainted, check_schedule_bounds, check_untainted_relations, ScheduleParams};
use linfor::{product_lists, verify_decomposition, PartialColouring};

#[derive(Parser)]
#[command(name = "linfor", version, about = "Linear forest decomposition toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Decompose a graph into linear forests (reserve, nibble, finish, verify).
    Decompose(DecomposeArgs),
    /// Verify a decomposition document against a graph and optional lists.
    Verify(VerifyArgs),
    /// Evaluate the parameter schedule and its bound checks.
    Schedule(ScheduleArgs),
    /// Run a Monte Carlo validation suite on a frozen instance.
    Montecarlo(MontecarloArgs),
    /// Exact brute-force answers for tiny instances.
    Oracle(OracleArgs),
    /// Dump the monitored path set of one (edge, colour) pair as JSON.
    Danger(DangerArgs),
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    graph: PathBuf,
    /// Base-colour lists JSON; omitted means uniform synthetic lists.
    #[arg(long)]
    lists: Option<PathBuf>,
    #[arg(long, value_parser = ["strict", "empirical"], default_value = "empirical")]
    mode: String,
    #[arg(long, default_value_t = 0.25)]
    p: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    max_restarts: u32,
    /// Scaled targets/thresholds JSON for empirical mode.
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Uniform-mode palette size (defaults to 8 * max degree).
    #[arg(long)]
    colours: Option<u32>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    transcript: PathBuf,
    /// Run report JSON (defaults next to --out).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    decomposition: PathBuf,
    #[arg(long)]
    lists: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScheduleArgs {
    /// Maximum degree; accepts plain numbers or exponent form like `e20`.
    #[arg(long)]
    delta: String,
    #[arg(long, default_value_t = 0.25)]
    p: f64,
    #[arg(long)]
    ell: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MontecarloArgs {
    #[arg(long, value_parser = ["retention", "listkeep", "nstar", "danger"])]
    suite: String,
    /// Path to an instance JSON, or `builtin:star4` / `builtin:mixed`.
    #[arg(long)]
    instance: String,
    #[arg(long, default_value_t = 100_000)]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write the resolved instance JSON (handy as a template).
    #[arg(long)]
    write_instance: Option<PathBuf>,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    lists: Option<PathBuf>,
    /// Scan all connected graphs up to this many vertices instead.
    #[arg(long)]
    scan: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DangerArgs {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    lists: PathBuf,
    /// Optional partial colouring JSON: {"u-v": {"base": b, "copy": k}, ...}.
    #[arg(long)]
    colouring: Option<PathBuf>,
    /// Edge as `u-v`.
    #[arg(long)]
    edge: String,
    /// Twin colour as `base.copy`.
    #[arg(long)]
    colour: String,
    #[arg(long)]
    ell: Option<u32>,
    #[arg(long)]
    out: PathBuf,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
    fn budget(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
    fn internal(message: impl Into<String>) -> Self {
        Failure {
            code: 4,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Decompose(args) => cmd_decompose(args),
        Command::Verify(args) => cmd_verify(args),
        Command::Schedule(args) => cmd_schedule(args),
        Command::Montecarlo(args) => cmd_montecarlo(args),
        Command::Oracle(args) => cmd_oracle(args),
        Command::Danger(args) => cmd_danger(args),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, content: &str) -> Result<(), Failure> {
    fs::write(path, content).map_err(|e| Failure::internal(format!("{}: {e}", path.display())))
}

fn load_graph(path: &Path) -> Result<Graph, Failure> {
    Graph::parse(&read_file(path)?).map_err(|e| Failure::input(e.to_string()))
}

fn load_lists(g: &Graph, path: &Path) -> Result<linfor::BaseLists, Failure> {
    parse_base_lists(g, &read_file(path)?).map_err(|e| Failure::input(e.to_string()))
}

fn transcript_csv(rows: &[TranscriptRow]) -> String {
    let mut out = String::from("i,min_list,max_colour_nbhd,max_reserved,max_X,max_Y,max_Z,restarts\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.i, r.min_list, r.max_colour_nbhd, r.max_reserved, r.max_x, r.max_y, r.max_z, r.restarts
        ));
    }
    out
}

fn cmd_decompose(args: DecomposeArgs) -> Result<(), Failure> {
    let g = load_graph(&args.graph)?;
    let lists = match &args.lists {
        Some(p) => Some(load_lists(&g, p)?),
        None => None,
    };
    let targets: Targets = match &args.targets {
        Some(p) => serde_json::from_str(&read_file(p)?)
            .map_err(|e| Failure::input(format!("targets: {e}")))?,
        None => Targets::default(),
    };
    if !(args.p > 0.0 && args.p < 1.0) {
        return Err(Failure::input(format!("p must be in (0,1), got {}", args.p)));
    }
    if args.max_restarts == 0 {
        return Err(Failure::input("max-restarts must be at least 1"));
    }
    let mode = match args.mode.as_str() {
        "strict" => NibbleMode::Strict,
        _ => NibbleMode::Empirical,
    };
    let cfg = PipelineConfig {
        nibble: NibbleConfig {
            mode,
            p: args.p,
            max_restarts: args.max_restarts,
            targets,
            check_danger_free: true,
        },
        seed: args.seed,
        uniform_colours: args.colours,
    };
    let outcome = match run_pipeline(&g, lists.as_ref(), &cfg) {
        Ok(o) => o,
        Err(PipelineError::Nibble(e)) => {
            return Err(match e {
                NibbleError::Input(_) => Failure::input(e.to_string()),
                NibbleError::Internal(_) => Failure::internal(e.to_string()),
                _ => Failure::budget(e.to_string()),
            });
        }
    };

    let mut doc = serde_json::to_value(linfor::colour::DecompositionDoc::from(
        &outcome.decomposition,
    ))
    .unwrap();
    doc.as_object_mut().unwrap().insert(
        "params".into(),
        serde_json::json!({
            "mode": outcome.info.mode,
            "p": outcome.info.p,
            "ell": outcome.info.ell,
            "delta": outcome.info.delta,
            "seed": outcome.info.seed,
        }),
    );
    write_file(&args.out, &(serde_json::to_string_pretty(&doc).unwrap() + "\n"))?;
    write_file(&args.transcript, &transcript_csv(&outcome.transcript))?;
    let report_path = args
        .report
        .unwrap_or_else(|| sibling(&args.out, "report.json"));
    let report = serde_json::json!({
        "info": outcome.info,
        "verifier": outcome.report,
        "failure": outcome.failure,
    });
    write_file(&report_path, &(serde_json::to_string_pretty(&report).unwrap() + "\n"))?;

    if outcome.budget_exhausted {
        return Err(Failure::budget(format!(
            "completion stopped in phase {:?} after {} resamples; partial artifacts written",
            outcome.info.completion_phase, outcome.info.completion_budget_used
        )));
    }
    if !outcome.report.passes() {
        return Err(Failure::internal("verification failed on emitted decomposition"));
    }
    println!(
        "decomposed {} edges into {} classes ({} nibble-coloured, {} completed, fallback: {})",
        g.edge_count(),
        outcome.info.num_classes,
        outcome.info.nibble_coloured,
        outcome.info.residual_edges,
        outcome.info.fallback_used,
    );
    Ok(())
}

fn sibling(out: &Path, name: &str) -> PathBuf {
    out.parent()
        .map(|d| d.join(name))
        .unwrap_or_else(|| PathBuf::from(name))
}

fn cmd_verify(args: VerifyArgs) -> Result<(), Failure> {
    let g = load_graph(&args.graph)?;
    let d = Decomposition::from_json(&read_file(&args.decomposition)?)
        .map_err(|e| Failure::input(e.to_string()))?;
    let lists = match &args.lists {
        Some(p) => Some(load_lists(&g, p)?),
        None => None,
    };
    let report = verify_decomposition(&g, &d, lists.as_ref());
    let doc = serde_json::json!({
        "passes": report.passes(),
        "num_classes": d.num_classes(),
        "flags": report,
    });
    let text = serde_json::to_string_pretty(&doc).unwrap() + "\n";
    match &args.out {
        Some(p) => write_file(p, &text)?,
        None => println!("{text}"),
    }
    if report.passes() {
        Ok(())
    } else {
        Err(Failure::internal("decomposition does not verify"))
    }
}

fn parse_delta(text: &str) -> Result<ScheduleParams, Failure> {
    let params = if let Some(exp) = text.strip_prefix('e') {
        let e: f64 = exp
            .parse()
            .map_err(|_| Failure::input(format!("bad delta {text:?}")))?;
        ScheduleParams::from_exponent(e, 0.25)
    } else {
        let d: f64 = text
            .parse()
            .map_err(|_| Failure::input(format!("bad delta {text:?}")))?;
        ScheduleParams::new(d, 0.25)
    };
    params.map_err(|e| Failure::input(e.to_string()))
}

fn cmd_schedule(args: ScheduleArgs) -> Result<(), Failure> {
    if !(args.p > 0.0 && args.p < 1.0) {
        return Err(Failure::input(format!("p must be in (0,1), got {}", args.p)));
    }
    let mut params = parse_delta(&args.delta)?;
    params.p = args.p;
    if let Some(ell) = args.ell {
        params = params.with_ell(ell).map_err(|e| Failure::input(e.to_string()))?;
    }
    let schedule = build_schedule(params).map_err(|e| Failure::input(e.to_string()))?;
    let mut csv = String::from("i,L,N,R,retain,keep\n");
    for row in &schedule.rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            row.i, row.big_l, row.big_n, row.big_r, row.retain, row.keep
        ));
    }
    write_file(&args.out, &csv)?;
    let untainted = build_untainted(&schedule);
    let sidecar_doc = serde_json::json!({
        "i0": schedule.i0,
        "params": schedule.params,
        "bounds": check_schedule_bounds(&schedule),
        "untainted": check_untainted_relations(&schedule, &untainted),
    });
    let sidecar = args.out.with_extension("json");
    write_file(&sidecar, &(serde_json::to_string_pretty(&sidecar_doc).unwrap() + "\n"))?;
    println!("i0 = {}, rows = {}", schedule.i0, schedule.rows.len());
    Ok(())
}

fn load_instance(source: &str) -> Result<FrozenInstance, Failure> {
    if let Some(name) = source.strip_prefix("builtin:") {
        return builtin_instance(name).map_err(|e| Failure::input(e.to_string()));
    }
    FrozenInstance::from_json(&read_file(Path::new(source))?)
        .map_err(|e| Failure::input(e.to_string()))
}

fn cmd_montecarlo(args: MontecarloArgs) -> Result<(), Failure> {
    let inst = load_instance(&args.instance)?;
    if let Some(path) = &args.write_instance {
        write_file(path, &(inst.to_json() + "\n"))?;
    }
    let key = StreamKey::root(args.seed);
    let reports: Vec<McReport> = match args.suite.as_str() {
        "retention" => mc_retention(&inst, args.trials, key, args.threads),
        "listkeep" => mc_list_keep(&inst, args.trials, key, args.threads),
        "nstar" => mc_nstar(&inst, args.trials, key, args.threads),
        _ => mc_danger(&inst, args.trials, key, args.threads),
    };
    let pass = reports.iter().all(|r| r.pass);
    let doc = serde_json::json!({
        "suite": args.suite,
        "instance": args.instance,
        "trials": args.trials,
        "seed": args.seed,
        "pass": pass,
        "reports": reports,
    });
    write_file(&args.out, &(serde_json::to_string_pretty(&doc).unwrap() + "\n"))?;
    if pass {
        println!("{}: all reports pass", args.suite);
        Ok(())
    } else {
        Err(Failure::internal(format!("{} suite has failing reports", args.suite)))
    }
}

fn cmd_oracle(args: OracleArgs) -> Result<(), Failure> {
    if let Some(max_n) = args.scan {
        let report = conjecture_scan(max_n).map_err(|e| Failure::input(e.to_string()))?;
        write_file(
            &args.out,
            &(serde_json::to_string_pretty(&report).unwrap() + "\n"),
        )?;
        println!(
            "scanned {} graphs up to {} vertices; {} above ceil(delta/2), {} violations",
            report.graphs_checked,
            report.max_n,
            report.above_half,
            report.violations.len()
        );
        return Ok(());
    }
    let graph_path = args
        .graph
        .as_ref()
        .ok_or_else(|| Failure::input("oracle needs --graph or --scan"))?;
    let g = load_graph(graph_path)?;
    let la = exact_linear_arboricity(&g).map_err(|e| Failure::input(e.to_string()))?;
    let witness = exact_decomposition(&g).map_err(|e| Failure::input(e.to_string()))?;
    let list_result = match &args.lists {
        Some(p) => {
            let lists = load_lists(&g, p)?;
            let found = brute_force_list_2colouring(&g, &lists)
                .map_err(|e| Failure::input(e.to_string()))?;
            Some(found.map(|d| {
                serde_json::to_value(linfor::colour::DecompositionDoc::from(&d)).unwrap()
            }))
        }
        None => None,
    };
    let doc = serde_json::json!({
        "la": la,
        "delta": g.max_degree(),
        "witness": linfor::colour::DecompositionDoc::from(&witness),
        "list_two_colouring": match list_result {
            None => serde_json::Value::Null,
            Some(None) => serde_json::json!({"exists": false}),
            Some(Some(d)) => serde_json::json!({"exists": true, "witness": d}),
        },
    });
    write_file(&args.out, &(serde_json::to_string_pretty(&doc).unwrap() + "\n"))?;
    println!("la = {la}");
    Ok(())
}

fn parse_twin(text: &str) -> Result<TwinColour, Failure> {
    let (b, c) = text
        .split_once('.')
        .ok_or_else(|| Failure::input(format!("colour must be base.copy, got {text:?}")))?;
    let base: u32 = b
        .parse()
        .map_err(|_| Failure::input(format!("bad colour base {b:?}")))?;
    let copy: u8 = c
        .parse()
        .map_err(|_| Failure::input(format!("bad colour copy {c:?}")))?;
    if copy != 1 && copy != 2 {
        return Err(Failure::input("copy index must be 1 or 2"));
    }
    Ok(TwinColour::new(base, copy))
}

fn cmd_danger(args: DangerArgs) -> Result<(), Failure> {
    let g = load_graph(&args.graph)?;
    let base = load_lists(&g, &args.lists)?;
    let lists = product_lists(&base);
    let mut gamma = PartialColouring::empty(g.edge_count());
    if let Some(path) = &args.colouring {
        let doc: std::collections::BTreeMap<String, TwinColour> =
            serde_json::from_str(&read_file(path)?)
                .map_err(|e| Failure::input(format!("colouring: {e}")))?;
        for (key, c) in doc {
            let (us, vs) = key
                .split_once('-')
                .ok_or_else(|| Failure::input(format!("bad edge key {key:?}")))?;
            let u: u32 = us.parse().map_err(|_| Failure::input("bad edge key"))?;
            let v: u32 = vs.parse().map_err(|_| Failure::input("bad edge key"))?;
            let e = g
                .edge_between(u, v)
                .ok_or_else(|| Failure::input(format!("no edge ({u},{v})")))?;
            gamma.set(e, c);
        }
    }
    let (us, vs) = args
        .edge
        .split_once('-')
        .ok_or_else(|| Failure::input("edge must be u-v"))?;
    let u: u32 = us.parse().map_err(|_| Failure::input("bad edge"))?;
    let v: u32 = vs.parse().map_err(|_| Failure::input("bad edge"))?;
    if g.edge_between(u, v).is_none() {
        return Err(Failure::input(format!("no edge ({u},{v})")));
    }
    let colour = parse_twin(&args.colour)?;
    let ell = args
        .ell
        .unwrap_or_else(|| (2.0 * (g.max_degree().max(2) as f64).ln()).ceil() as u32);
    let view = StateView::new(&g, &lists, &gamma);
    let set = danger_set(view, u, v, colour, ell as usize);
    let doc = serde_json::json!({
        "edge": [u, v],
        "colour": colour,
        "ell": ell,
        "count": set.len(),
        "paths": set
            .iter()
            .map(|p| serde_json::json!({
                "vertices": p.vertices,
                "uncoloured_length": p.uncoloured_len,
            }))
            .collect::<Vec<_>>(),
    });
    write_file(&args.out, &(serde_json::to_string_pretty(&doc).unwrap() + "\n"))?;
    println!("{} monitored paths", set.len());
    Ok(())
}
