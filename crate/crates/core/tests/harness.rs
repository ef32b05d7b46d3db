use std::fs;

use linktrail::harness::{
    comparison_report, parse_results_csv, phi1_from_label, results_to_csv, run_experiment, ExperimentSpec, Metric,
    Subset,
};
use linktrail::rdf::{parse_ntriples, Term};
use linktrail::web::{save_web, Document, LatencyModel, WebOfLinkedData};

/// One relevant branch `r` and eight irrelevant ones hanging off the seed.
fn branching_web() -> WebOfLinkedData {
    let mut seed_doc = String::from("<http://ex.org/s> <http://ex.org/p> <http://ex.org/r> .\n");
    let mut docs = Vec::new();
    for i in 0..8 {
        seed_doc.push_str(&format!("<http://ex.org/s> <http://ex.org/p> <http://ex.org/i{i}> .\n"));
        docs.push((format!("http://ex.org/i{i}"), format!("<http://ex.org/i{i}> <http://ex.org/other> \"x\" .\n")));
    }
    docs.push(("http://ex.org/s".into(), seed_doc));
    docs.push((
        "http://ex.org/r".into(),
        "<http://ex.org/r> <http://ex.org/q> \"found\" .\n".into(),
    ));
    WebOfLinkedData::from_documents(
        docs.into_iter()
            .map(|(u, nt)| Document::new(Term::uri(u), parse_ntriples(&nt).unwrap())),
        LatencyModel::default(),
    )
}

const QUERY: &str = "<http://ex.org/s> <http://ex.org/p> ?x .\n?x <http://ex.org/q> ?v .\n";

fn spec_in(dir: &std::path::Path, body: &str) -> ExperimentSpec {
    save_web(&branching_web(), &dir.join("web")).unwrap();
    fs::write(dir.join("q.rq"), QUERY).unwrap();
    let path = dir.join("spec.yaml");
    fs::write(&path, body).unwrap();
    ExperimentSpec::load(&path).unwrap()
}

#[test]
fn deterministic_repetitions_have_no_spread_and_random_does() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_in(
        dir.path(),
        "webs:\n  - path: web\nqueries:\n  - path: q.rq\nstrategies: [baseline, random, dfs]\nrepetitions: 5\nseed_base: 11\n",
    );
    let rows = run_experiment(&spec).unwrap();
    assert_eq!(rows.len(), 3 * 3);
    for r in &rows {
        assert_eq!(r.web, "web");
        assert_eq!(r.query, "q");
        assert_eq!(r.n, 5, "{r:?}");
        let g = r.gmean.unwrap();
        assert!((0.0..=1.0).contains(&g));
        if r.strategy == "random" {
            if r.metric == Metric::RelRt1st {
                assert!(r.stdev.unwrap() > 0.0);
            }
        } else {
            assert_eq!(r.stdev, Some(0.0), "{r:?}");
        }
    }
    let back = parse_results_csv(&results_to_csv(&rows)).unwrap();
    assert_eq!(back.len(), rows.len());
}

#[test]
fn oracle_cells_get_a_dry_run_and_failures_do_not_abort() {
    let dir = tempfile::tempdir().unwrap();
    let spec = spec_in(
        dir.path(),
        "webs:\n  - path: web\nqueries:\n  - path: q.rq\n  - name: empty\n    text: \"<http://ex.org/s> <http://ex.org/none> ?x .\"\nstrategies: [baseline, oracle]\npolicies: [lr, \"static:1,0\"]\nrepetitions: 2\n",
    );
    let rows = run_experiment(&spec).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2 * 3);
    let oracle: Vec<_> = rows.iter().filter(|r| r.strategy == "oracle" && r.query == "q").collect();
    assert!(oracle.iter().all(|r| r.n == 2));
    // Static order 1,0 does not apply to a one-pattern query.
    let errored: Vec<_> = rows.iter().filter(|r| r.query == "empty").collect();
    assert!(errored.iter().all(|r| r.n == 0 && r.gmean.is_none() && r.error.is_some()));
}

#[test]
fn generated_webs_feed_the_comparison() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("base.nt"),
        "<http://ex.org/a> <http://ex.org/p> <http://ex.org/b> .\n\
         <http://ex.org/a> <http://ex.org/p> <http://ex.org/c> .\n\
         <http://ex.org/b> <http://ex.org/p> <http://ex.org/c> .\n\
         <http://ex.org/c> <http://ex.org/n> \"c\" .\n\
         <http://ex.org/b> <http://ex.org/n> \"b\" .\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("q.rq"),
        "<http://ex.org/a> <http://ex.org/p> ?x .\n?x <http://ex.org/n> ?v .\n",
    )
    .unwrap();
    let path = dir.path().join("spec.json");
    fs::write(
        &path,
        r#"{"webs":[{"name":"t","base":"base.nt","configs":[[0.0,1.0],[1.0,0.0]],"seed":2}],
            "queries":[{"path":"q.rq"}],"strategies":["baseline","rcc1","bfs"],"repetitions":1}"#,
    )
    .unwrap();
    let spec = ExperimentSpec::load(&path).unwrap();
    let rows = run_experiment(&spec).unwrap();
    let webs: std::collections::BTreeSet<_> = rows.iter().map(|r| r.web.as_str()).collect();
    assert_eq!(webs.into_iter().collect::<Vec<_>>(), ["t/w0_100", "t/w100"]);
    let rep = comparison_report(&rows, phi1_from_label);
    for strategy in ["rcc1", "bfs"] {
        let r = rep.row(strategy, "lr", Subset::All).unwrap();
        assert_eq!(r.cases + r.errored + r.missing_baseline, 2);
        assert_eq!(r.pct_worse(Metric::RelRt1st).unwrap_or(0.0), 0.0);
        assert_eq!(r.pct_better(Metric::RelRt1st).unwrap_or(0.0), 0.0);
        assert_eq!(rep.row(strategy, "lr", Subset::Dense).unwrap().cases + rep.row(strategy, "lr", Subset::Dense).unwrap().errored, 1);
    }
}
