use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};
use std::time::Instant;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_linktrail"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn sorted_lines(text: &str) -> Vec<String> {
    let mut v: Vec<String> = text.lines().map(str::to_string).collect();
    v.sort();
    v
}

fn dir_files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let path = e.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn gen_reproduces_the_fixture_byte_for_byte() {
    let tmp = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        let out = tmp.path().join(sub);
        let o = run(&[
            "gen",
            "--base",
            p(&fixture("base.nt")),
            "--phi1",
            "0.66",
            "--phi2",
            "0.33",
            "--seed",
            "7",
            "--latency-jitter-ms",
            "20",
            "--out",
            p(&out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        assert!(String::from_utf8_lossy(&o.stderr).contains("\"phi1\":0.66"));
    }
    let a = dir_files(&tmp.path().join("a"));
    assert_eq!(a.len(), 21);
    assert_eq!(a, dir_files(&tmp.path().join("b")));
    assert_eq!(a, dir_files(&fixture("web")));
}

#[test]
fn gen_rejects_bad_probabilities_and_missing_base() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("w");
    let bad = run(&["gen", "--base", p(&fixture("base.nt")), "--phi1", "1.5", "--phi2", "0", "--out", p(&out)]);
    assert_eq!(code(&bad), 1);
    let missing = run(&["gen", "--base", "/nonexistent.nt", "--phi1", "1", "--phi2", "0", "--out", p(&out)]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["run", "--help"])), 0);
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["run", "--bogus"])), 1);
    let web = fixture("web");
    let q = fixture("q1.rq");
    assert_eq!(code(&run(&["run", "--web", p(&web), "--query", p(&q), "--strategy", "nope"])), 1);
    assert_eq!(code(&run(&["run", "--web", p(&web), "--query", p(&q), "--strategy", "oracle"])), 1);
    assert_eq!(code(&run(&["run", "--web", p(&web), "--query", p(&q), "--policy", "static:0,1,2"])), 1);
}

#[test]
fn run_reports_input_errors() {
    let q = fixture("q1.rq");
    let o = run(&["run", "--web", "/nonexistent/web", "--query", p(&q)]);
    assert_eq!(code(&o), 2);
    let tmp = tempfile::tempdir().unwrap();
    let bad_query = tmp.path().join("bad.rq");
    fs::write(&bad_query, "?s <http://ex.org/p> .").unwrap();
    let o = run(&["run", "--web", p(&fixture("web")), "--query", p(&bad_query)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn run_streams_solutions_and_writes_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = tmp.path().join("t.jsonl");
    let dot = tmp.path().join("g.dot");
    let o = run(&[
        "run",
        "--web",
        p(&fixture("web")),
        "--query",
        p(&fixture("q3.rq")),
        "--strategy",
        "isrcc1",
        "--policy",
        "lr-mi",
        "--threads",
        "3",
        "--trace",
        p(&trace),
        "--dump-linkgraph",
        p(&dot),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 4);
    for line in out.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["l"], "\"Product 7\"");
    }
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("\"strategy\":\"isrcc1\""), "{stderr}");
    assert!(stderr.contains("\"routing\":\"lr-mi\""));

    let events: Vec<serde_json::Value> = fs::read_to_string(&trace)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(events.first().unwrap()["event"], "exec_start");
    assert_eq!(events.last().unwrap()["event"], "exec_end");
    assert_eq!(events.iter().filter(|e| e["event"] == "solution_emitted").count(), 4);
    assert!(fs::read_to_string(&dot).unwrap().starts_with("digraph"));

    let set = run(&["run", "--web", p(&fixture("web")), "--query", p(&fixture("q3.rq")), "--set-semantics", "--deterministic"]);
    assert_eq!(stdout(&set).lines().count(), 1);
}

#[test]
fn deterministic_runs_are_repeatable() {
    let (web, q) = (fixture("web"), fixture("q1.rq"));
    let args = [
        "run",
        "--web",
        p(&web),
        "--query",
        p(&q),
        "--strategy",
        "random",
        "--deterministic",
        "--seed",
        "3",
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut traces = Vec::new();
    for i in 0..2 {
        let t = tmp.path().join(format!("{i}.jsonl"));
        let mut a: Vec<&str> = args.to_vec();
        a.extend(["--trace", p(&t)]);
        let o = run(&a);
        assert_eq!(code(&o), 0);
        traces.push((stdout(&o), fs::read_to_string(&t).unwrap()));
    }
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn first_solution_arrives_before_retrieval_ends() {
    let tmp = tempfile::tempdir().unwrap();
    let trace = tmp.path().join("t.jsonl");
    let started = Instant::now();
    let mut child = bin()
        .args([
            "run",
            "--web",
            p(&fixture("web")),
            "--query",
            p(&fixture("q3.rq")),
            "--clock",
            "wall",
            "--deterministic",
            "--trace",
            p(&trace),
        ])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut lines = BufReader::new(child.stdout.take().unwrap()).lines();
    let first = lines.next().unwrap().unwrap();
    let first_at = started.elapsed();
    assert!(first.contains("Product 7"));
    assert_eq!(lines.count(), 3);
    assert!(child.wait().unwrap().success());
    let done_at = started.elapsed();
    // Four more lookups of at least 50 ms each follow the first solution.
    assert!(done_at - first_at >= std::time::Duration::from_millis(150), "{first_at:?} {done_at:?}");

    let text = fs::read_to_string(&trace).unwrap();
    let t = |kind: &str| -> u64 {
        text.lines()
            .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
            .find(|e| e["event"] == kind)
            .unwrap()["t"]
            .as_u64()
            .unwrap()
    };
    assert!(t("solution_emitted") < t("retrieval_complete"));
}

#[test]
fn serve_and_run_over_http() {
    let mut server = bin()
        .args(["serve", "--web", p(&fixture("web")), "--port", "0", "--no-latency"])
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let endpoint = BufReader::new(server.stdout.take().unwrap())
        .lines()
        .next()
        .unwrap()
        .unwrap();
    assert!(endpoint.starts_with("http://127.0.0.1:"));
    let remote = run(&["run", "--web", &endpoint, "--query", p(&fixture("q2.rq")), "--deterministic"]);
    let local = run(&["run", "--web", p(&fixture("web")), "--query", p(&fixture("q2.rq")), "--deterministic"]);
    server.kill().unwrap();
    let _ = server.wait();
    assert_eq!(code(&remote), 0, "{}", String::from_utf8_lossy(&remote.stderr));
    assert_eq!(sorted_lines(&stdout(&remote)), sorted_lines(&stdout(&local)));
    assert_eq!(stdout(&local).lines().count(), 2);
}

#[test]
fn serve_fails_on_missing_web() {
    let o = run(&["serve", "--web", "/nonexistent", "--port", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn stats_prints_one_row() {
    let o = run(&["stats", "--web", p(&fixture("web")), "--query", p(&fixture("q2.rq"))]);
    assert_eq!(code(&o), 0);
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].starts_with("web,query,docs,edges,scc,diameter"));
    assert!(lines[1].starts_with("web,q2,"));
    assert!(lines[1].ends_with(",2"));

    let o = run(&["stats", "--format", "json", "--web", p(&fixture("web")), "--query", p(&fixture("q2.rq"))]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["cardinality"], 2);
}

#[test]
fn rcc_dry_run_feeds_the_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let rcc = tmp.path().join("rcc.json");
    let web = fixture("web");
    let q = fixture("q3.rq");
    let o = run(&["rcc-dry-run", "--web", p(&web), "--query", p(&q), "--out", p(&rcc)]);
    assert_eq!(code(&o), 0);
    let map: std::collections::BTreeMap<String, u64> = serde_json::from_str(&fs::read_to_string(&rcc).unwrap()).unwrap();
    assert_eq!(map["http://example.org/shop/product7"], 4);
    assert_eq!(map.values().filter(|c| **c > 0).count(), 3);

    let printed = run(&["rcc-dry-run", "--web", p(&web), "--query", p(&q)]);
    assert_eq!(stdout(&printed), fs::read_to_string(&rcc).unwrap());

    let oracle = run(&["run", "--web", p(&web), "--query", p(&q), "--strategy", "oracle", "--rcc", p(&rcc)]);
    assert_eq!(code(&oracle), 0);
    assert_eq!(stdout(&oracle).lines().count(), 4);
}

#[test]
fn experiment_prints_results_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    let report = tmp.path().join("report.csv");
    let o = run(&["experiment", "--spec", p(&fixture("experiment.yaml")), "--report", p(&report)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("web,query,strategy,policy,metric,gmean,stdev,n"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 2 * 4 * 2 * 3);
    assert!(rows.iter().all(|r| r.starts_with("fixture,") && r.ends_with(",2")));
    let rep = fs::read_to_string(&report).unwrap();
    assert!(rep.starts_with("strategy,policy,subset,relRT1st_worse"));
    assert_eq!(rep.lines().count(), 1 + 3 * 2 * 3);

    let results = tmp.path().join("results.csv");
    fs::write(&results, &out).unwrap();
    let report2 = tmp.path().join("report2.csv");
    let o = run(&["experiment", "--results", p(&results), "--report", p(&report2)]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(&report2).unwrap(), rep);

    let j = run(&["experiment", "--format", "json", "--spec", p(&fixture("experiment.yaml"))]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&j)).unwrap();
    assert_eq!(v.as_array().unwrap().len(), rows.len());
}

#[test]
fn experiment_input_errors() {
    assert_eq!(code(&run(&["experiment", "--spec", "/nonexistent.yaml"])), 2);
    let tmp = tempfile::tempdir().unwrap();
    let spec = tmp.path().join("s.json");
    fs::write(&spec, r#"{"webs":[{"path":"missing"}],"queries":[{"text":"?s ?p ?o ."}]}"#).unwrap();
    assert_eq!(code(&run(&["experiment", "--spec", p(&spec)])), 2);
    assert_eq!(code(&run(&["experiment"])), 1);
}

#[test]
fn dominance_compares_cold_and_warm() {
    let o = run(&[
        "dominance",
        "--web",
        p(&fixture("web")),
        "--query",
        p(&fixture("q3.rq")),
        "--threads",
        "1,2",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "run,threads,time_us,lookups,solutions,ratio");
    assert!(lines[1].starts_with("warm,,"));
    assert_eq!(lines.len(), 4);
}
