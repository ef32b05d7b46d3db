//! Single-threaded runner with a fixed operator schedule.
//!
//! Each round gives the retrieval operator, every triple-pattern operator
//! (ingestion before probing) and the dispatcher one step. The retrieval
//! operator only starts a lookup once no local message is pending, so the
//! effects of one document are fully processed before the next lookup is
//! chosen. Local processing takes no virtual time.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use super::retrieval::Retrieval;
use super::{
    build_operators, ClockMode, Dispatcher, EngineConfig, EventKind, ExecutionResult, ExecutionStats,
    ExecutionTrace, IntermediateSolution, Route, Solution, TraceEvent,
};
use crate::priority::{FeedbackMessage, Prioritizer};
use crate::rdf::{BgpQuery, Term, Triple};
use crate::web::{Lookup, WebAccess};

enum Clock {
    Virtual(u64),
    Wall(Instant),
}

impl Clock {
    fn now(&self) -> u64 {
        match self {
            Clock::Virtual(t) => *t,
            Clock::Wall(start) => start.elapsed().as_micros() as u64,
        }
    }

    fn spend(&mut self, lookup: &Lookup) {
        match self {
            Clock::Virtual(t) => *t += lookup.delay_us,
            Clock::Wall(_) => {
                if lookup.simulated {
                    std::thread::sleep(Duration::from_micros(lookup.delay_us));
                }
            }
        }
    }
}

pub(crate) fn run<W, F>(
    query: &BgpQuery,
    web: &W,
    cfg: &EngineConfig,
    prio: Prioritizer,
    mut on_solution: F,
) -> ExecutionResult
where
    W: WebAccess + ?Sized,
    F: FnMut(&Solution),
{
    let started = Instant::now();
    let mut clock = match cfg.clock {
        ClockMode::Virtual => Clock::Virtual(0),
        ClockMode::Wall => Clock::Wall(started),
    };
    let n = query.len();
    let mut ops = build_operators(query, cfg);
    let mut triples_in: Vec<VecDeque<(Triple, Term)>> = vec![VecDeque::new(); n];
    let mut probes_in: Vec<VecDeque<IntermediateSolution>> = vec![VecDeque::new(); n];
    let mut dispatch_in: VecDeque<IntermediateSolution> = VecDeque::new();
    let mut feedback: VecDeque<FeedbackMessage> = VecDeque::new();
    let mut dispatcher = Dispatcher::new(cfg, n);
    let mut retrieval = Retrieval::new(prio, query, cfg.record_pops);
    let mut trace = vec![TraceEvent::new(EventKind::ExecStart, 0)];
    let mut solutions = Vec::new();
    let mut stats = ExecutionStats::default();
    let mut retrieval_done = false;

    loop {
        let local_idle = dispatch_in.is_empty()
            && triples_in.iter().all(VecDeque::is_empty)
            && probes_in.iter().all(VecDeque::is_empty);

        if local_idle && !retrieval_done {
            while let Some(m) = feedback.pop_front() {
                retrieval.apply_feedback(&m);
            }
            match retrieval.pop() {
                Some((uri, p)) => {
                    trace.push(TraceEvent::lookup(EventKind::LookupStart, clock.now(), &uri, None));
                    let lookup = web.lookup(&uri);
                    clock.spend(&lookup);
                    let done = retrieval.complete(&uri, p, &lookup, query);
                    trace.push(TraceEvent::lookup(
                        EventKind::LookupDone,
                        clock.now(),
                        &uri,
                        done.n_triples,
                    ));
                    if let Some(doc) = done.document {
                        for (i, t) in done.matching {
                            triples_in[i].push_back((t, doc.clone()));
                        }
                    }
                    continue;
                }
                None => {
                    retrieval_done = true;
                    trace.push(TraceEvent::new(EventKind::RetrievalComplete, clock.now()));
                }
            }
        }
        if local_idle && retrieval_done {
            break;
        }

        for i in 0..n {
            if let Some((t, doc)) = triples_in[i].pop_front() {
                let ts = &mut stats.initial_solutions;
                if let Some(is) = ops[i].ingest(&t, &doc, || {
                    *ts += 1;
                    *ts
                }) {
                    dispatch_in.push_back(is);
                }
            } else if let Some(is) = probes_in[i].pop_front() {
                let merged = ops[i].probe(&is);
                stats.joins += merged.len() as u64;
                dispatch_in.extend(merged);
            }
        }

        if let Some(is) = dispatch_in.pop_front() {
            match dispatcher.route(&is, &ops) {
                Route::Output => {
                    feedback.extend(dispatcher.feedback(&is, true));
                    let s = Solution {
                        mapping: is.mapping,
                        provenance: is.provenance.iter().cloned().collect(),
                        t: clock.now(),
                    };
                    on_solution(&s);
                    trace.push(TraceEvent {
                        event: EventKind::SolutionEmitted,
                        t: s.t,
                        uri: None,
                        n: Some(solutions.len() as u64 + 1),
                    });
                    solutions.push(s);
                }
                Route::To(i) => {
                    feedback.extend(dispatcher.feedback(&is, false));
                    probes_in[i].push_back(is);
                }
            }
        }
    }
    // Feedback that arrived after the last pop still updates the link graph.
    while let Some(m) = feedback.pop_front() {
        retrieval.apply_feedback(&m);
    }
    trace.push(TraceEvent::new(EventKind::ExecEnd, clock.now()));

    stats.dispatched = dispatcher.dispatched;
    stats.probes_per_operator = ops.iter().map(|o| o.received()).collect();
    stats.wall_time = started.elapsed();
    retrieval.fill_stats(&mut stats);
    ExecutionResult {
        solutions,
        trace: ExecutionTrace { events: trace },
        stats,
        graph: retrieval.prio.graph().clone(),
    }
}
