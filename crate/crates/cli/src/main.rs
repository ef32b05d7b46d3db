use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use linktrail::engine::{execute_streaming, ClockMode, EngineConfig, RoutingPolicy, Semantics};
use linktrail::harness::{
    comparison_report, dominance_experiment, parse_results_csv, phi1_from_label, rcc_dry_run, read_rcc_map,
    results_to_csv, run_experiment, write_rcc_map, CellResult, ExperimentSpec,
};
use linktrail::priority::StrategyKind;
use linktrail::rdf::{parse_query, BgpQuery};
use linktrail::testweb::{
    generate_testweb, ground_truth, subweb_statistics, BaseDataset, TestWebConfig, STATS_CSV_HEADER,
};
use linktrail::web::http::{serve_http_on, HttpWeb, ServeOptions};
use linktrail::web::{load_web, save_web, LatencyModel, Lookup, WebAccess, WebOfLinkedData};

#[derive(Parser, Debug)]
#[command(name = "linktrail", version, about = "Traversal-based query execution over Webs of Linked Data")]
struct Cli {
    /// Seed for generation and for randomized strategies.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    /// Output format for tables.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a test Web from a base dataset.
    Gen(GenArgs),
    /// Serve a Web over HTTP at GET /lookup?uri=<percent-encoded URI>.
    Serve(ServeArgs),
    /// Execute a query, printing solutions as JSON lines as they are found.
    Run(RunArgs),
    /// Run an experiment sweep and print the results table.
    Experiment(ExperimentArgs),
    /// Statistics of the reachable subweb of a query.
    Stats(WebQueryArgs),
    /// Per-document result contribution counts from a baseline execution.
    RccDryRun(DryRunArgs),
    /// Execution time with and without data retrieval.
    Dominance(DominanceArgs),
}

#[derive(Args, Debug)]
struct LatencyArgs {
    /// Fixed part of every lookup delay, in milliseconds.
    #[arg(long, default_value_t = 50)]
    latency_base_ms: u64,
    /// Upper bound of the per-URI extra delay, in milliseconds.
    #[arg(long, default_value_t = 0)]
    latency_jitter_ms: u64,
    /// Seed of the per-URI extra delay.
    #[arg(long, default_value_t = 0)]
    latency_seed: u64,
}

impl LatencyArgs {
    fn model(&self) -> LatencyModel {
        LatencyModel {
            base_ms: self.latency_base_ms,
            jitter_ms: self.latency_jitter_ms,
            seed: self.latency_seed,
        }
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Base dataset in N-Triples.
    #[arg(long)]
    base: PathBuf,
    /// Probability of placing a link triple into both documents.
    #[arg(long)]
    phi1: f64,
    /// Probability of placing it into the subject's document otherwise.
    #[arg(long)]
    phi2: f64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    latency: LatencyArgs,
}

#[derive(Args, Debug)]
struct ServeArgs {
    /// Web directory or manifest file.
    #[arg(long)]
    web: PathBuf,
    /// Port to listen on; 0 picks a free one.
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Address to bind.
    #[arg(long, default_value = "127.0.0.1")]
    bind: String,
    /// Answer immediately instead of sleeping for the latency model's delay.
    #[arg(long)]
    no_latency: bool,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Web directory, manifest file, or http:// endpoint of `linktrail serve`.
    #[arg(long)]
    web: String,
    /// Query file.
    #[arg(long)]
    query: PathBuf,
    #[arg(long, default_value = "baseline")]
    strategy: StrategyKind,
    /// Routing policy: lr, lr-li, lr-mi, lr-mc, lr-mc-li, lr-mc-mi, lr-mc-ls, lr-mc-ms, or static:<i,j,...>.
    #[arg(long, default_value = "lr")]
    policy: RoutingPolicy,
    /// Parallel lookup threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Drop duplicate solutions.
    #[arg(long)]
    set_semantics: bool,
    /// Single-threaded execution with a fixed operator schedule.
    #[arg(long)]
    deterministic: bool,
    /// Time source for the trace: virtual (simulated delays) or wall.
    #[arg(long, default_value = "virtual")]
    clock: ClockMode,
    /// Write the execution trace as JSON lines.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the final link graph in DOT format.
    #[arg(long)]
    dump_linkgraph: Option<PathBuf>,
    /// RCC map from `rcc-dry-run`, required by the oracle strategy.
    #[arg(long)]
    rcc: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Experiment spec (JSON or YAML).
    #[arg(long, required_unless_present = "results", conflicts_with = "results")]
    spec: Option<PathBuf>,
    /// Skip running and read a results table written earlier.
    #[arg(long)]
    results: Option<PathBuf>,
    /// Write the comparison against the baseline to this file.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct WebQueryArgs {
    /// Web directory or manifest file.
    #[arg(long)]
    web: PathBuf,
    /// Query file.
    #[arg(long)]
    query: PathBuf,
}

#[derive(Args, Debug)]
struct DryRunArgs {
    #[command(flatten)]
    input: WebQueryArgs,
    /// Write the map here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DominanceArgs {
    #[command(flatten)]
    input: WebQueryArgs,
    /// Lookup thread counts for the retrieving runs.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    threads: Vec<usize>,
}

/// Failure classes, each with its own exit code.
enum Failure {
    Usage(anyhow::Error),
    Input(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Input(e) | Failure::Runtime(e) => e,
        }
    }
}

type Outcome = Result<(), Failure>;

trait Classify<T> {
    fn input(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }

    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into()))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}

fn dispatch(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Gen(a) => gen(cli, a),
        Command::Serve(a) => serve(cli, a),
        Command::Run(a) => run(cli, a),
        Command::Experiment(a) => experiment(cli, a),
        Command::Stats(a) => stats(cli, a),
        Command::RccDryRun(a) => dry_run(cli, a),
        Command::Dominance(a) => dominance(cli, a),
    }
}

fn announce(command: &str, config: serde_json::Value) {
    eprintln!("{}", json!({ "command": command, "config": config }));
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("cannot read {}", path.display()))
        .input()
}

fn read_query(path: &Path) -> Result<BgpQuery, Failure> {
    parse_query(&read_text(path)?)
        .with_context(|| format!("in {}", path.display()))
        .input()
}

fn read_web(path: &Path) -> Result<WebOfLinkedData, Failure> {
    load_web(path).input()
}

fn write_file(path: &Path, contents: &str) -> Outcome {
    fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .runtime()
}

fn gen(cli: &Cli, a: &GenArgs) -> Outcome {
    let cfg = TestWebConfig::new(a.phi1, a.phi2, cli.seed).map_err(|e| Failure::Usage(e.into()))?;
    announce(
        "gen",
        json!({
            "base": a.base, "phi1": a.phi1, "phi2": a.phi2, "seed": cli.seed,
            "out": a.out, "latency": a.latency.model(),
        }),
    );
    let base = BaseDataset::from_ntriples(&read_text(&a.base)?)
        .with_context(|| format!("in {}", a.base.display()))
        .input()?;
    let web = generate_testweb(&base, &cfg, a.latency.model());
    save_web(&web, &a.out).runtime()?;
    log::info!("wrote {} documents to {}", web.len(), a.out.display());
    Ok(())
}

fn serve(_cli: &Cli, a: &ServeArgs) -> Outcome {
    let web = read_web(&a.web)?;
    announce(
        "serve",
        json!({ "web": a.web, "bind": a.bind, "port": a.port, "apply_latency": !a.no_latency }),
    );
    let handle = serve_http_on(
        Arc::new(web),
        &format!("{}:{}", a.bind, a.port),
        ServeOptions {
            apply_latency: !a.no_latency,
        },
    )
    .runtime()?;
    println!("{}", handle.endpoint());
    io::stdout().flush().runtime()?;
    handle.join();
    Ok(())
}

enum AnyWeb {
    Local(WebOfLinkedData),
    Remote(HttpWeb),
}

impl WebAccess for AnyWeb {
    fn lookup(&self, uri: &linktrail::rdf::Term) -> Lookup {
        match self {
            AnyWeb::Local(w) => w.lookup(uri),
            AnyWeb::Remote(w) => w.lookup(uri),
        }
    }
}

fn run(cli: &Cli, a: &RunArgs) -> Outcome {
    let query = read_query(&a.query)?;
    let web = if a.web.starts_with("http://") || a.web.starts_with("https://") {
        AnyWeb::Remote(HttpWeb::new(a.web.trim_end_matches('/')))
    } else {
        AnyWeb::Local(read_web(Path::new(&a.web))?)
    };
    let oracle_rcc = match (&a.rcc, a.strategy) {
        (Some(p), _) => Some(Arc::new(read_rcc_map(p).input()?.into_iter().collect())),
        (None, StrategyKind::Oracle) => {
            return Err(Failure::Usage(anyhow!("the oracle strategy needs --rcc <file.json>")));
        }
        (None, _) => None,
    };
    let cfg = EngineConfig {
        strategy: a.strategy,
        routing: a.policy.clone(),
        lookup_threads: a.threads,
        semantics: if a.set_semantics { Semantics::Set } else { Semantics::Bag },
        deterministic: a.deterministic,
        seed: cli.seed,
        clock: a.clock,
        record_pops: false,
        oracle_rcc,
    };
    let mut config = cfg.describe();
    config["web"] = json!(a.web);
    config["query"] = json!(a.query);
    announce("run", config);

    let stdout = io::stdout();
    let result = execute_streaming(&query, &web, &cfg, move |s| {
        let mut out = stdout.lock();
        let _ = writeln!(out, "{}", s.bindings_json());
        let _ = out.flush();
    })
    .map_err(|e| match e {
        linktrail::engine::EngineError::Routing(_) | linktrail::engine::EngineError::NoLookupThreads => {
            Failure::Usage(e.into())
        }
        other => Failure::Runtime(other.into()),
    })?;

    if let Some(p) = &a.trace {
        write_file(p, &result.trace.to_jsonl())?;
    }
    if let Some(p) = &a.dump_linkgraph {
        write_file(p, &result.graph.to_dot())?;
    }
    log::info!(
        "{} solutions, {} lookups ({} failed)",
        result.solutions.len(),
        result.stats.lookup_order.len(),
        result.stats.failed_lookups.len()
    );
    Ok(())
}

fn print_rows(format: Format, rows: &[CellResult]) -> Outcome {
    let text = match format {
        Format::Csv => results_to_csv(rows),
        Format::Json => {
            let arr: Vec<_> = rows
                .iter()
                .map(|r| {
                    json!({
                        "web": r.web, "query": r.query, "strategy": r.strategy, "policy": r.policy,
                        "metric": r.metric, "gmean": r.gmean, "stdev": r.stdev, "n": r.n, "error": r.error,
                    })
                })
                .collect();
            format!("{}\n", serde_json::to_string_pretty(&arr).expect("JSON values serialize"))
        }
    };
    print!("{text}");
    Ok(())
}

fn experiment(cli: &Cli, a: &ExperimentArgs) -> Outcome {
    let rows = if let Some(results) = &a.results {
        announce("experiment", json!({ "results": results, "report": a.report }));
        parse_results_csv(&read_text(results)?).input()?
    } else {
        let path = a.spec.as_deref().expect("clap requires --spec or --results");
        let spec = ExperimentSpec::load(path).input()?;
        announce(
            "experiment",
            json!({
                "spec": path,
                "webs": spec.webs.len(),
                "queries": spec.queries.len(),
                "strategies": spec.strategies.iter().map(|s| s.name()).collect::<Vec<_>>(),
                "policies": spec.policies.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                "repetitions": spec.repetitions,
                "seed_base": spec.seed_base,
                "lookup_threads": spec.lookup_threads,
                "deterministic": spec.deterministic,
                "report": a.report,
            }),
        );
        let rows = run_experiment(&spec).input()?;
        for r in rows.iter().filter(|r| r.error.is_some()) {
            log::warn!(
                "{} {} {} {}: {}",
                r.web,
                r.query,
                r.strategy,
                r.policy,
                r.error.as_deref().unwrap_or_default()
            );
        }
        print_rows(cli.format, &rows)?;
        rows
    };
    if let Some(p) = &a.report {
        let rep = comparison_report(&rows, phi1_from_label);
        let text = match cli.format {
            Format::Csv => rep.to_csv(),
            Format::Json => format!("{}\n", serde_json::to_string_pretty(&rep).expect("report serializes")),
        };
        write_file(p, &text)?;
    }
    Ok(())
}

fn stats(cli: &Cli, a: &WebQueryArgs) -> Outcome {
    let web = read_web(&a.web)?;
    let query = read_query(&a.query)?;
    announce("stats", json!({ "web": a.web, "query": a.query }));
    let gt = ground_truth(&web, &query);
    let s = subweb_statistics(&gt.subweb, &gt.rcc, gt.cardinality());
    let web_name = a.web.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let query_name = a.query.file_stem().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    match cli.format {
        Format::Csv => {
            println!("{STATS_CSV_HEADER}");
            println!("{}", s.csv_row(&web_name, &query_name));
        }
        Format::Json => {
            let paths = |p: &Option<linktrail::testweb::PathStats>| {
                p.as_ref()
                    .map(|p| json!({ "mean": p.mean, "stdev": p.stdev, "min": p.min, "max": p.max, "count": p.count }))
            };
            let v = json!({
                "web": web_name, "query": query_name,
                "docs": s.n_docs, "edges": s.n_edges, "scc": s.n_scc, "diameter": s.diameter,
                "relevant_docs": s.n_relevant, "pct_relevant": s.pct_relevant,
                "relevant_paths": paths(&s.relevant_paths), "irrelevant_paths": paths(&s.irrelevant_paths),
                "cardinality": s.result_cardinality,
            });
            println!("{}", serde_json::to_string_pretty(&v).expect("JSON values serialize"));
        }
    }
    Ok(())
}

fn dry_run(_cli: &Cli, a: &DryRunArgs) -> Outcome {
    let web = read_web(&a.input.web)?;
    let query = read_query(&a.input.query)?;
    announce(
        "rcc-dry-run",
        json!({ "web": a.input.web, "query": a.input.query, "out": a.out }),
    );
    let map = rcc_dry_run(&web, &query).runtime()?;
    match &a.out {
        Some(p) => write_rcc_map(&map, p).runtime(),
        None => {
            let json: BTreeMap<&str, u64> = map.iter().map(|(t, c)| (t.lexical(), *c)).collect();
            println!("{}", serde_json::to_string_pretty(&json).expect("JSON values serialize"));
            Ok(())
        }
    }
}

fn dominance(cli: &Cli, a: &DominanceArgs) -> Outcome {
    if a.threads.contains(&0) {
        return Err(Failure::Usage(anyhow!("thread counts must be positive")));
    }
    let web = read_web(&a.input.web)?;
    let query = read_query(&a.input.query)?;
    let base = EngineConfig {
        seed: cli.seed,
        ..EngineConfig::default()
    };
    announce(
        "dominance",
        json!({ "web": a.input.web, "query": a.input.query, "threads": a.threads, "latency": web.latency() }),
    );
    let rep = dominance_experiment(&web, &query, &a.threads, &base).runtime()?;
    match cli.format {
        Format::Csv => print!("{}", rep.to_csv()),
        Format::Json => println!("{}", serde_json::to_string_pretty(&rep).expect("report serializes")),
    }
    Ok(())
}
