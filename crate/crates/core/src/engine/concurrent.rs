//! Threaded runner: lookup workers, one thread per triple-pattern operator,
//! and one dispatcher thread, connected by unbounded FIFO channels.
//!
//! A triple-pattern operator handles both of its inputs on one thread, so
//! assigning a timestamp and indexing the new intermediate solution happen
//! together with respect to its probes.
//!
//! Termination: every message in flight and every running lookup is counted
//! in `pending`. Once the lookup queue is empty with no lookup running, no
//! new work can reach the operators except what `pending` already counts,
//! so `pending == 0` after that point means every operator is idle.
//!
//! Virtual time: worker `i` owns a virtual lookup slot. A lookup starts at
//! the later of the slot becoming free and the URI being discovered, and
//! finishes its delay later. A solution's time is the latest finish time of
//! the documents it was built from.

use std::collections::HashMap;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, Sender};

use super::operators::selectivity;
use super::retrieval::Retrieval;
use super::{
    build_operators, ClockMode, Dispatcher, EngineConfig, EventKind, ExecutionResult, ExecutionStats,
    ExecutionTrace, IntermediateSolution, Route, RoutingView, Solution, TpOp, TraceEvent,
};
use crate::priority::{FeedbackMessage, Prioritizer};
use crate::rdf::{BgpQuery, Term, Triple, Var};
use crate::web::WebAccess;

enum OpMsg {
    Triple(Triple, Term),
    Probe(IntermediateSolution),
    Stop,
}

enum DispatchMsg {
    Is(IntermediateSolution),
    Stop,
}

/// Operator figures the dispatcher reads while the operator runs elsewhere.
struct SharedOpStats {
    vars: Vec<Var>,
    index_size: AtomicUsize,
    received: AtomicU64,
    returned: AtomicU64,
}

impl RoutingView for SharedOpStats {
    fn vars(&self) -> &[Var] {
        &self.vars
    }

    fn index_size(&self) -> usize {
        self.index_size.load(Ordering::Relaxed)
    }

    fn selectivity(&self) -> f64 {
        selectivity(
            self.received.load(Ordering::Relaxed),
            self.returned.load(Ordering::Relaxed),
        )
    }
}

struct Quiescence {
    pending: AtomicUsize,
    retrieval_done: AtomicBool,
    lock: Mutex<()>,
    cv: Condvar,
}

impl Quiescence {
    fn add(&self, n: usize) {
        self.pending.fetch_add(n, Ordering::SeqCst);
    }

    fn finish_one(&self) {
        if self.pending.fetch_sub(1, Ordering::SeqCst) == 1 && self.retrieval_done.load(Ordering::SeqCst) {
            let _g = self.lock.lock().expect("quiescence lock");
            self.cv.notify_all();
        }
    }

    fn mark_retrieval_done(&self) {
        self.retrieval_done.store(true, Ordering::SeqCst);
        let _g = self.lock.lock().expect("quiescence lock");
        self.cv.notify_all();
    }

    fn wait(&self) {
        let mut g = self.lock.lock().expect("quiescence lock");
        while !(self.retrieval_done.load(Ordering::SeqCst) && self.pending.load(Ordering::SeqCst) == 0) {
            g = self
                .cv
                .wait_timeout(g, Duration::from_millis(20))
                .expect("quiescence lock")
                .0;
        }
    }
}

struct DropState {
    retrieval: Retrieval,
    in_flight: usize,
    discovered_at: HashMap<Term, u64>,
    slot_free: Vec<u64>,
    latest_finish: u64,
}

struct Shared<'a, W: ?Sized> {
    query: &'a BgpQuery,
    web: &'a W,
    clock: ClockMode,
    started: Instant,
    drop: Mutex<DropState>,
    drop_cv: Condvar,
    feedback_rx: Receiver<FeedbackMessage>,
    quiet: Quiescence,
    timestamps: AtomicU64,
    finish_times: Mutex<HashMap<Term, u64>>,
    trace: Mutex<Vec<TraceEvent>>,
    op_tx: Vec<Sender<OpMsg>>,
}

impl<W: WebAccess + ?Sized> Shared<'_, W> {
    fn elapsed(&self) -> u64 {
        self.started.elapsed().as_micros() as u64
    }

    fn stamp(&self, virtual_t: u64) -> u64 {
        match self.clock {
            ClockMode::Virtual => virtual_t,
            ClockMode::Wall => self.elapsed(),
        }
    }

    fn record(&self, e: TraceEvent) {
        self.trace.lock().expect("trace lock").push(e);
    }

    fn lookup_worker(&self, slot: usize) {
        loop {
            let job = {
                let mut st = self.drop.lock().expect("retrieval lock");
                loop {
                    for m in self.feedback_rx.try_iter() {
                        st.retrieval.apply_feedback(&m);
                    }
                    if let Some((uri, p)) = st.retrieval.pop() {
                        st.in_flight += 1;
                        self.quiet.add(1);
                        let ready = st.discovered_at.get(&uri).copied().unwrap_or(0);
                        let start = st.slot_free[slot].max(ready);
                        break Some((uri, p, start));
                    }
                    if st.in_flight == 0 {
                        if !self.quiet.retrieval_done.load(Ordering::SeqCst) {
                            let t = self.stamp(st.latest_finish);
                            self.record(TraceEvent::new(EventKind::RetrievalComplete, t));
                            self.quiet.mark_retrieval_done();
                        }
                        self.drop_cv.notify_all();
                        break None;
                    }
                    st = self.drop_cv.wait(st).expect("retrieval lock");
                }
            };
            let Some((uri, popped, start)) = job else {
                return;
            };

            self.record(TraceEvent::lookup(EventKind::LookupStart, self.stamp(start), &uri, None));
            let lookup = self.web.lookup(&uri);
            if self.clock == ClockMode::Wall && lookup.simulated {
                std::thread::sleep(Duration::from_micros(lookup.delay_us));
            }
            let finish = start + lookup.delay_us;

            let done = {
                let mut st = self.drop.lock().expect("retrieval lock");
                st.slot_free[slot] = finish;
                st.latest_finish = st.latest_finish.max(finish);
                let done = st.retrieval.complete(&uri, popped, &lookup, self.query);
                for x in &done.new_uris {
                    st.discovered_at.insert(x.clone(), finish);
                }
                if let Some(doc) = &done.document {
                    self.finish_times
                        .lock()
                        .expect("finish-time lock")
                        .insert(doc.clone(), finish);
                }
                self.record(TraceEvent::lookup(
                    EventKind::LookupDone,
                    self.stamp(finish),
                    &uri,
                    done.n_triples,
                ));
                st.in_flight -= 1;
                done
            };
            self.drop_cv.notify_all();

            if let Some(doc) = done.document {
                self.quiet.add(done.matching.len());
                for (i, t) in done.matching {
                    self.op_tx[i]
                        .send(OpMsg::Triple(t, doc.clone()))
                        .expect("operator threads outlive lookups");
                }
            }
            self.quiet.finish_one();
        }
    }

    fn operator(&self, mut op: TpOp, rx: Receiver<OpMsg>, stats: &SharedOpStats, out: &Sender<DispatchMsg>) -> (TpOp, u64, u64) {
        let mut initial = 0;
        let mut joins = 0;
        for msg in rx {
            match msg {
                OpMsg::Triple(t, doc) => {
                    if let Some(is) = op.ingest(&t, &doc, || self.timestamps.fetch_add(1, Ordering::SeqCst) + 1) {
                        initial += 1;
                        stats.index_size.store(op.index_size(), Ordering::Relaxed);
                        self.quiet.add(1);
                        out.send(DispatchMsg::Is(is)).expect("dispatcher alive");
                    }
                }
                OpMsg::Probe(is) => {
                    let merged = op.probe(&is);
                    stats.received.store(op.received(), Ordering::Relaxed);
                    stats.returned.store(op.returned(), Ordering::Relaxed);
                    joins += merged.len() as u64;
                    self.quiet.add(merged.len());
                    for m in merged {
                        out.send(DispatchMsg::Is(m)).expect("dispatcher alive");
                    }
                }
                OpMsg::Stop => break,
            }
            self.quiet.finish_one();
        }
        (op, initial, joins)
    }

    fn dispatcher<F: FnMut(&Solution)>(
        &self,
        mut d: Dispatcher,
        rx: Receiver<DispatchMsg>,
        views: &[SharedOpStats],
        feedback_tx: Sender<FeedbackMessage>,
        on_solution: &mut F,
    ) -> (Dispatcher, Vec<Solution>) {
        let mut solutions = Vec::new();
        for msg in rx {
            let is = match msg {
                DispatchMsg::Is(is) => is,
                DispatchMsg::Stop => break,
            };
            match d.route(&is, views) {
                Route::Output => {
                    for f in d.feedback(&is, true) {
                        let _ = feedback_tx.send(f);
                    }
                    let t = match self.clock {
                        ClockMode::Virtual => {
                            let ft = self.finish_times.lock().expect("finish-time lock");
                            is.provenance.iter().filter_map(|p| ft.get(p)).copied().max().unwrap_or(0)
                        }
                        ClockMode::Wall => self.elapsed(),
                    };
                    let s = Solution {
                        mapping: is.mapping,
                        provenance: is.provenance.iter().cloned().collect(),
                        t,
                    };
                    on_solution(&s);
                    solutions.push(s);
                }
                Route::To(i) => {
                    for f in d.feedback(&is, false) {
                        let _ = feedback_tx.send(f);
                    }
                    self.quiet.add(1);
                    self.op_tx[i].send(OpMsg::Probe(is)).expect("operator alive");
                }
            }
            self.quiet.finish_one();
        }
        (d, solutions)
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
    F: FnMut(&Solution) + Send,
{
    let started = Instant::now();
    let n = query.len();
    let threads = cfg.effective_threads();
    let ops = build_operators(query, cfg);
    let views: Vec<SharedOpStats> = ops
        .iter()
        .map(|o| SharedOpStats {
            vars: o.vars().to_vec(),
            index_size: AtomicUsize::new(0),
            received: AtomicU64::new(0),
            returned: AtomicU64::new(0),
        })
        .collect();
    let (op_tx, op_rx): (Vec<_>, Vec<_>) = (0..n).map(|_| unbounded::<OpMsg>()).unzip();
    let (disp_tx, disp_rx) = unbounded::<DispatchMsg>();
    let (feedback_tx, feedback_rx) = unbounded::<FeedbackMessage>();

    let shared = Shared {
        query,
        web,
        clock: cfg.clock,
        started,
        drop: Mutex::new(DropState {
            retrieval: Retrieval::new(prio, query, cfg.record_pops),
            in_flight: 0,
            discovered_at: HashMap::new(),
            slot_free: vec![0; threads],
            latest_finish: 0,
        }),
        drop_cv: Condvar::new(),
        feedback_rx,
        quiet: Quiescence {
            pending: AtomicUsize::new(0),
            retrieval_done: AtomicBool::new(false),
            lock: Mutex::new(()),
            cv: Condvar::new(),
        },
        timestamps: AtomicU64::new(0),
        finish_times: Mutex::new(HashMap::new()),
        trace: Mutex::new(vec![TraceEvent::new(EventKind::ExecStart, 0)]),
        op_tx,
    };
    let dispatcher = Dispatcher::new(cfg, n);

    let (op_results, (dispatcher, mut solutions)) = std::thread::scope(|s| {
        let sh = &shared;
        let views = &views;
        let op_handles: Vec<_> = ops
            .into_iter()
            .zip(op_rx)
            .enumerate()
            .map(|(i, (op, rx))| {
                let out = disp_tx.clone();
                s.spawn(move || sh.operator(op, rx, &views[i], &out))
            })
            .collect();
        let on_solution = &mut on_solution;
        let disp_handle = s.spawn(move || sh.dispatcher(dispatcher, disp_rx, views, feedback_tx, on_solution));
        let workers: Vec<_> = (0..threads).map(|slot| s.spawn(move || sh.lookup_worker(slot))).collect();

        for w in workers {
            w.join().expect("lookup worker panicked");
        }
        sh.quiet.wait();
        for tx in &sh.op_tx {
            let _ = tx.send(OpMsg::Stop);
        }
        let _ = disp_tx.send(DispatchMsg::Stop);
        let ops: Vec<(TpOp, u64, u64)> = op_handles
            .into_iter()
            .map(|h| h.join().expect("operator panicked"))
            .collect();
        (ops, disp_handle.join().expect("dispatcher panicked"))
    });

    let Shared {
        drop,
        feedback_rx,
        trace,
        clock,
        ..
    } = shared;
    let mut st = drop.into_inner().expect("retrieval lock");
    for m in feedback_rx.try_iter() {
        st.retrieval.apply_feedback(&m);
    }

    let mut events = trace.into_inner().expect("trace lock");
    solutions.sort_by_key(|s| s.t);
    for (k, s) in solutions.iter().enumerate() {
        events.push(TraceEvent {
            event: EventKind::SolutionEmitted,
            t: s.t,
            uri: None,
            n: Some(k as u64 + 1),
        });
    }
    let end = match clock {
        ClockMode::Virtual => st.latest_finish.max(solutions.last().map(|s| s.t).unwrap_or(0)),
        ClockMode::Wall => started.elapsed().as_micros() as u64,
    };
    // Stable: events with equal times keep the order they were recorded in.
    events.sort_by_key(|e| e.t);
    events.push(TraceEvent::new(EventKind::ExecEnd, end));

    let mut stats = ExecutionStats {
        initial_solutions: op_results.iter().map(|r| r.1).sum(),
        joins: op_results.iter().map(|r| r.2).sum(),
        probes_per_operator: op_results.iter().map(|r| r.0.received()).collect(),
        dispatched: dispatcher.dispatched,
        wall_time: started.elapsed(),
        ..ExecutionStats::default()
    };
    st.retrieval.fill_stats(&mut stats);
    ExecutionResult {
        solutions,
        trace: ExecutionTrace { events },
        stats,
        graph: st.retrieval.prio.graph().clone(),
    }
}
