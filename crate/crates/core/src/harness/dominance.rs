//! How much of an execution is spent retrieving data: the same query with
//! every document already cached versus with real (simulated) lookups.

use std::time::Instant;

use serde::Serialize;

use crate::engine::{execute, ClockMode, EngineConfig, EngineError};
use crate::rdf::BgpQuery;
use crate::web::{CachingAccess, WebAccess};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceRow {
    /// `None` for the cache-warm run.
    pub threads: Option<usize>,
    /// Execution time in microseconds: simulated lookup time plus measured
    /// local processing time.
    pub time_us: u64,
    /// Lookups that reached the underlying Web.
    pub lookups: u64,
    pub solutions: usize,
    /// `time_us / warm.time_us`.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub warm: DominanceRow,
    pub cold: Vec<DominanceRow>,
}

impl DominanceReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("run,threads,time_us,lookups,solutions,ratio\n");
        let mut line = |name: &str, r: &DominanceRow| {
            let threads = r.threads.map(|t| t.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{name},{threads},{},{},{},{}\n",
                r.time_us, r.lookups, r.solutions, r.ratio
            ));
        };
        line("warm", &self.warm);
        for r in &self.cold {
            line("cold", r);
        }
        out
    }
}

/// Runs the query once per thread count against the Web, then once more
/// with every lookup answered from a cache filled beforehand.
///
/// Cold times are the virtual execution time (lookup delays) plus the wall
/// time the run took; the warm time is wall time only.
pub fn dominance_experiment<W: WebAccess>(
    web: &W,
    query: &BgpQuery,
    threads_list: &[usize],
    base: &EngineConfig,
) -> Result<DominanceReport, EngineError> {
    let cache = CachingAccess::new(web);
    let mut cold = Vec::with_capacity(threads_list.len());
    for &threads in threads_list {
        let cfg = EngineConfig {
            lookup_threads: threads,
            deterministic: base.deterministic && threads == 1,
            clock: ClockMode::Virtual,
            ..base.clone()
        };
        let before = cache.inner_lookups();
        let started = Instant::now();
        let r = if cold.is_empty() {
            // The first cold run fills the cache for the warm one.
            execute(query, &cache, &cfg)?
        } else {
            execute(query, web, &cfg)?
        };
        let wall = started.elapsed().as_micros() as u64;
        let lookups = if cold.is_empty() {
            cache.inner_lookups() - before
        } else {
            r.stats.lookup_order.len() as u64
        };
        cold.push(DominanceRow {
            threads: Some(threads),
            time_us: r.trace.duration() + wall,
            lookups,
            solutions: r.solutions.len(),
            ratio: 0.0,
        });
    }

    let cfg = EngineConfig {
        lookup_threads: 1,
        deterministic: true,
        clock: ClockMode::Virtual,
        ..base.clone()
    };
    if cold.is_empty() {
        execute(query, &cache, &cfg)?;
    }
    let before = cache.inner_lookups();
    let started = Instant::now();
    let r = execute(query, &cache, &cfg)?;
    let wall = started.elapsed().as_micros().max(1) as u64;
    let warm = DominanceRow {
        threads: None,
        time_us: r.trace.duration() + wall,
        lookups: cache.inner_lookups() - before,
        solutions: r.solutions.len(),
        ratio: 1.0,
    };
    for row in &mut cold {
        row.ratio = row.time_us as f64 / warm.time_us as f64;
    }
    Ok(DominanceReport { warm, cold })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::{parse_ntriples, parse_query, Term};
    use crate::web::{Document, LatencyModel, WebOfLinkedData};

    #[test]
    fn warm_run_is_lookup_free() {
        let docs = (0..10).map(|i| {
            let nt = format!("<http://ex.org/{i}> <http://ex.org/next> <http://ex.org/{}> .\n", i + 1);
            Document::new(Term::uri(format!("http://ex.org/{i}")), parse_ntriples(&nt).unwrap())
        });
        let web = WebOfLinkedData::from_documents(docs, LatencyModel::default());
        let q = parse_query("<http://ex.org/0> <http://ex.org/next> ?a .\n?a <http://ex.org/next> ?b .").unwrap();
        let rep = dominance_experiment(&web, &q, &[1, 2], &EngineConfig::default()).unwrap();
        assert_eq!(rep.warm.lookups, 0);
        assert_eq!(rep.cold[0].lookups, 12);
        assert_eq!(rep.warm.solutions, rep.cold[0].solutions);
        assert!(rep.cold[0].time_us >= 150_000);
        assert!(rep.cold[0].ratio > 1.0);
        assert!(rep.to_csv().starts_with("run,threads"));
    }
}
