//! Baseline execution that records per-document RCCs for the oracle strategy.

use std::collections::BTreeMap;
use std::path::Path;

use super::ExperimentError;
use crate::engine::{execute, EngineConfig, EngineError};
use crate::priority::StrategyKind;
use crate::rdf::{BgpQuery, Term};
use crate::web::WebAccess;

/// RCC of every retrieved document, counted from the provenance of the
/// solutions of a deterministic baseline run.
pub fn rcc_dry_run<W: WebAccess + ?Sized>(web: &W, query: &BgpQuery) -> Result<BTreeMap<Term, u64>, EngineError> {
    let cfg = EngineConfig {
        strategy: StrategyKind::Baseline,
        deterministic: true,
        ..EngineConfig::default()
    };
    Ok(execute(query, web, &cfg)?.rcc())
}

/// Writes `{"<uri>": rcc, ...}` with keys in sorted order.
pub fn write_rcc_map(map: &BTreeMap<Term, u64>, path: &Path) -> Result<(), ExperimentError> {
    let json: BTreeMap<&str, u64> = map.iter().map(|(t, c)| (t.lexical(), *c)).collect();
    let mut text = serde_json::to_string_pretty(&json).expect("string keys serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_rcc_map(path: &Path) -> Result<BTreeMap<Term, u64>, ExperimentError> {
    let text = std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let raw: BTreeMap<String, u64> =
        serde_json::from_str(&text).map_err(|e| ExperimentError::Spec(format!("{}: {e}", path.display())))?;
    Ok(raw.into_iter().map(|(k, v)| (Term::uri(k), v)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::{parse_ntriples, parse_query};
    use crate::testweb::compute_rcc;
    use crate::web::{Document, LatencyModel, WebOfLinkedData};

    fn web() -> WebOfLinkedData {
        let d = |u: &str, nt: &str| Document::new(Term::uri(u), parse_ntriples(nt).unwrap());
        WebOfLinkedData::from_documents(
            [
                d("http://ex.org/a", "<http://ex.org/a> <http://ex.org/p> <http://ex.org/b> .\n"),
                d("http://ex.org/b", "<http://ex.org/b> <http://ex.org/p> <http://ex.org/c> .\n"),
            ],
            LatencyModel::zero(),
        )
    }

    #[test]
    fn matches_ground_truth_and_round_trips() {
        let w = web();
        let q = parse_query("<http://ex.org/a> <http://ex.org/p> ?x .\n?x <http://ex.org/p> ?y .").unwrap();
        let m = rcc_dry_run(&w, &q).unwrap();
        assert_eq!(m, compute_rcc(&w, &q));
        assert_eq!(m.values().sum::<u64>(), 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rcc.json");
        write_rcc_map(&m, &path).unwrap();
        assert_eq!(read_rcc_map(&path).unwrap(), m);
    }

    #[test]
    fn empty_result_gives_zeros() {
        let w = web();
        let q = parse_query("<http://ex.org/a> <http://ex.org/nothing> ?x .").unwrap();
        let m = rcc_dry_run(&w, &q).unwrap();
        assert!(!m.is_empty());
        assert!(m.values().all(|c| *c == 0));
    }
}
