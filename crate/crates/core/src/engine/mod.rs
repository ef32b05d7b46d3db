//! Traversal-based execution of a basic graph pattern query.
//!
//! A data-retrieval operator looks URIs up in priority order and forwards
//! the matching triples of every retrieved document to one operator per
//! triple pattern. Those build timestamped initial intermediate solutions and
//! join them with intermediate solutions the dispatcher routes to them. The
//! dispatcher emits intermediate solutions that cover every pattern and
//! feeds information about everything it routes back to the retrieval side.
//!
//! Two runners share this logic: a single-threaded deterministic one and a
//! threaded one. Time is virtual by default (lookup delays are added to a
//! clock instead of slept); [`ClockMode::Wall`] measures real time instead.

mod concurrent;
pub mod operators;
mod retrieval;
mod sequential;

use std::collections::{BTreeMap, BTreeSet};
use std::str::FromStr;
use std::sync::Arc;
use std::time::Duration;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linkgraph::LinkGraph;
use crate::priority::{FeedbackMessage, Prioritizer, Priority, PriorityError, RccMap, StrategyKind};
use crate::rdf::{BgpQuery, SolutionMapping, Term};
use crate::web::WebAccess;

pub use operators::{
    scan_document, Covered, IntermediateSolution, RoutingError, RoutingPolicy, RoutingView, ScanResult, TpOp,
};

/// Largest number of triple patterns a query may have.
pub const MAX_PATTERNS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Semantics {
    #[default]
    Bag,
    Set,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    /// Lookup delays advance a simulated clock; nothing sleeps.
    #[default]
    Virtual,
    /// Real elapsed time; simulated delays are slept.
    Wall,
}

impl FromStr for ClockMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "virtual" => Ok(ClockMode::Virtual),
            "wall" => Ok(ClockMode::Wall),
            _ => Err(format!("unknown clock mode {s:?} (expected virtual or wall)")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub strategy: StrategyKind,
    pub routing: RoutingPolicy,
    pub lookup_threads: usize,
    pub semantics: Semantics,
    /// Run everything on one thread with a fixed operator schedule. Implies
    /// a single lookup thread.
    pub deterministic: bool,
    pub seed: u64,
    pub clock: ClockMode,
    /// Keep a snapshot of the lookup queue at every pop.
    pub record_pops: bool,
    /// Required by [`StrategyKind::Oracle`].
    pub oracle_rcc: Option<Arc<RccMap>>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            strategy: StrategyKind::Baseline,
            routing: RoutingPolicy::Lr,
            lookup_threads: 1,
            semantics: Semantics::Bag,
            deterministic: true,
            seed: 0,
            clock: ClockMode::Virtual,
            record_pops: false,
            oracle_rcc: None,
        }
    }
}

impl EngineConfig {
    pub fn effective_threads(&self) -> usize {
        if self.deterministic {
            1
        } else {
            self.lookup_threads
        }
    }

    /// The settings as a JSON object, for logging alongside results.
    pub fn describe(&self) -> serde_json::Value {
        serde_json::json!({
            "strategy": self.strategy.name(),
            "routing": self.routing.to_string(),
            "lookup_threads": self.effective_threads(),
            "semantics": self.semantics,
            "deterministic": self.deterministic,
            "seed": self.seed,
            "clock": self.clock,
            "oracle_rcc_entries": self.oracle_rcc.as_ref().map(|m| m.len()),
        })
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Priority(#[from] PriorityError),
    #[error(transparent)]
    Routing(#[from] RoutingError),
    #[error("queries with more than {MAX_PATTERNS} triple patterns are not supported ({0} given)")]
    TooManyPatterns(usize),
    #[error("at least one lookup thread is required")]
    NoLookupThreads,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    ExecStart,
    LookupStart,
    LookupDone,
    SolutionEmitted,
    RetrievalComplete,
    ExecEnd,
}

/// One trace line. Times are microseconds since the start of the execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub event: EventKind,
    pub t: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uri: Option<String>,
    /// Triples in the document for `lookup_done` (absent when the lookup
    /// failed); running solution count for `solution_emitted`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
}

impl TraceEvent {
    fn new(event: EventKind, t: u64) -> Self {
        Self {
            event,
            t,
            uri: None,
            n: None,
        }
    }

    fn lookup(event: EventKind, t: u64, uri: &Term, n: Option<u64>) -> Self {
        Self {
            event,
            t,
            uri: Some(uri.lexical().to_string()),
            n,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub events: Vec<TraceEvent>,
}

impl ExecutionTrace {
    fn time_of(&self, kind: EventKind) -> Option<u64> {
        self.events.iter().find(|e| e.event == kind).map(|e| e.t)
    }

    pub fn start(&self) -> Option<u64> {
        self.time_of(EventKind::ExecStart)
    }

    pub fn end(&self) -> Option<u64> {
        self.time_of(EventKind::ExecEnd)
    }

    pub fn retrieval_complete(&self) -> Option<u64> {
        self.time_of(EventKind::RetrievalComplete)
    }

    /// `t_end - t_start`, or 0 for an incomplete trace.
    pub fn duration(&self) -> u64 {
        match (self.start(), self.end()) {
            (Some(s), Some(e)) => e.saturating_sub(s),
            _ => 0,
        }
    }

    pub fn solution_times(&self) -> Vec<u64> {
        self.events
            .iter()
            .filter(|e| e.event == EventKind::SolutionEmitted)
            .map(|e| e.t)
            .collect()
    }

    /// URIs in the order their lookups started.
    pub fn lookups(&self) -> Vec<&str> {
        self.events
            .iter()
            .filter(|e| e.event == EventKind::LookupStart)
            .filter_map(|e| e.uri.as_deref())
            .collect()
    }

    /// Starts with `exec_start`, ends with `exec_end`, times never decrease,
    /// and retrieval completes before the end.
    pub fn is_well_formed(&self) -> bool {
        let first = self.events.first().map(|e| e.event);
        let last = self.events.last().map(|e| e.event);
        let monotone = self.events.windows(2).all(|w| w[0].t <= w[1].t);
        let rc = self
            .events
            .iter()
            .position(|e| e.event == EventKind::RetrievalComplete);
        first == Some(EventKind::ExecStart)
            && last == Some(EventKind::ExecEnd)
            && monotone
            && rc.is_some_and(|i| i + 1 < self.events.len())
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("trace events serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, serde_json::Error> {
        let events = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { events })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub mapping: SolutionMapping,
    /// Documents that contributed at least one triple.
    pub provenance: Vec<Term>,
    /// Emission time in microseconds since the start of the execution.
    pub t: u64,
}

impl Solution {
    /// `{"x": "<http://...>", ...}` with terms in N-Triples syntax.
    pub fn bindings_json(&self) -> serde_json::Value {
        let map: serde_json::Map<String, serde_json::Value> = self
            .mapping
            .iter()
            .map(|(v, t)| (v.name().to_string(), serde_json::Value::String(t.to_string())))
            .collect();
        serde_json::Value::Object(map)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PopRecord {
    pub uri: Term,
    pub priority: Priority,
    /// Queue contents right after the pop, in pop order.
    pub queued: Vec<(Term, Priority)>,
}

#[derive(Debug, Clone, Default)]
pub struct ExecutionStats {
    /// URIs in the order they were taken from the lookup queue.
    pub lookup_order: Vec<Term>,
    pub failed_lookups: BTreeSet<Term>,
    /// Documents whose triples were scanned.
    pub retrieved_documents: BTreeSet<Term>,
    pub pops: Vec<PopRecord>,
    /// Number of URIs popped before the first solution provenance feedback
    /// was applied to the lookup queue.
    pub first_provenance_pop: Option<usize>,
    /// Initial intermediate solutions built from matching triples.
    pub initial_solutions: u64,
    /// Intermediate solutions handled by the dispatcher.
    pub dispatched: u64,
    /// Intermediate solutions produced by joins.
    pub joins: u64,
    /// Intermediate solutions each triple-pattern operator was probed with.
    pub probes_per_operator: Vec<u64>,
    pub wall_time: Duration,
}

#[derive(Debug, Clone)]
pub struct ExecutionResult {
    pub solutions: Vec<Solution>,
    pub trace: ExecutionTrace,
    pub stats: ExecutionStats,
    /// Final state of the link graph, including RCCs.
    pub graph: LinkGraph,
}

impl ExecutionResult {
    /// RCC of every retrieved document, counted from solution provenance.
    pub fn rcc(&self) -> BTreeMap<Term, u64> {
        let mut m: BTreeMap<Term, u64> = self
            .stats
            .retrieved_documents
            .iter()
            .map(|d| (d.clone(), 0))
            .collect();
        for s in &self.solutions {
            for d in &s.provenance {
                *m.entry(d.clone()).or_insert(0) += 1;
            }
        }
        m
    }

    pub fn mappings(&self) -> Vec<SolutionMapping> {
        self.solutions.iter().map(|s| s.mapping.clone()).collect()
    }
}

pub fn execute<W: WebAccess + ?Sized>(
    query: &BgpQuery,
    web: &W,
    cfg: &EngineConfig,
) -> Result<ExecutionResult, EngineError> {
    execute_streaming(query, web, cfg, |_| {})
}

/// Like [`execute`], calling `on_solution` as soon as each solution is found.
pub fn execute_streaming<W, F>(
    query: &BgpQuery,
    web: &W,
    cfg: &EngineConfig,
    on_solution: F,
) -> Result<ExecutionResult, EngineError>
where
    W: WebAccess + ?Sized,
    F: FnMut(&Solution) + Send,
{
    if query.len() > MAX_PATTERNS {
        return Err(EngineError::TooManyPatterns(query.len()));
    }
    if cfg.lookup_threads == 0 {
        return Err(EngineError::NoLookupThreads);
    }
    cfg.routing.validate(query.len())?;
    let prio = Prioritizer::new(cfg.strategy, cfg.seed, cfg.oracle_rcc.clone())?;
    Ok(if cfg.deterministic {
        sequential::run(query, web, cfg, prio, on_solution)
    } else {
        concurrent::run(query, web, cfg, prio, on_solution)
    })
}

pub(crate) enum Route {
    Output,
    To(usize),
}

/// Routing and feedback decisions; the operators it routes to are passed in.
pub(crate) struct Dispatcher {
    policy: RoutingPolicy,
    rng: ChaCha8Rng,
    n: usize,
    send_is_feedback: bool,
    pub dispatched: u64,
}

impl Dispatcher {
    /// In deterministic mode routing ties are broken the same way whatever
    /// the execution seed, so only the random strategy depends on it.
    pub(crate) fn new(cfg: &EngineConfig, n: usize) -> Self {
        let seed = if cfg.deterministic { 0 } else { cfg.seed };
        Self {
            policy: cfg.routing.clone(),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x5bd1_e995_d15a_7c4e),
            n,
            send_is_feedback: cfg.strategy.uses_feedback(),
            dispatched: 0,
        }
    }

    pub(crate) fn route<V: RoutingView>(&mut self, is: &IntermediateSolution, ops: &[V]) -> Route {
        self.dispatched += 1;
        if is.covered.is_full(self.n) {
            Route::Output
        } else {
            Route::To(self.policy.route(is, ops, &mut self.rng))
        }
    }

    /// Messages for the retrieval side about an intermediate solution that
    /// was just routed or output.
    pub(crate) fn feedback(&self, is: &IntermediateSolution, output: bool) -> Vec<FeedbackMessage> {
        let mut out = Vec::with_capacity(2);
        if self.send_is_feedback {
            out.push(FeedbackMessage::IntermediateSolution {
                bindings: is.mapping.clone(),
                covered_count: is.covered.count(),
            });
        }
        if output {
            out.push(FeedbackMessage::SolutionProvenance(
                is.provenance.iter().cloned().collect(),
            ));
        }
        out
    }
}

pub(crate) fn build_operators(query: &BgpQuery, cfg: &EngineConfig) -> Vec<TpOp> {
    query
        .patterns()
        .iter()
        .enumerate()
        .map(|(i, p)| TpOp::new(i, p.clone(), cfg.semantics == Semantics::Set))
        .collect()
}
