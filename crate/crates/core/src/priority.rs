//! URI-lookup prioritization: the lookup queue and the strategies that set
//! and adjust the priorities of queued URIs.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linkgraph::LinkGraph;
use crate::rdf::{SolutionMapping, Term};

/// Precomputed result contribution counters, keyed by document URI.
pub type RccMap = HashMap<Term, u64>;

pub const PAGERANK_DAMPING: f64 = 0.85;
pub const PAGERANK_EPSILON: f64 = 1e-8;
pub const PAGERANK_MAX_ITER: usize = 100;

/// Higher values are looked up sooner.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Priority(pub f64);

impl PartialEq for Priority {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Priority {}

impl PartialOrd for Priority {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Priority {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<f64> for Priority {
    fn from(v: f64) -> Self {
        Priority(v)
    }
}

/// Max-priority queue of URIs; equal priorities pop in arrival order.
#[derive(Debug, Clone, Default)]
pub struct LookupQueue {
    order: BTreeMap<(Reverse<Priority>, u64), Term>,
    entries: HashMap<Term, (Priority, u64)>,
    next_seq: u64,
}

impl LookupQueue {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `false` if the URI is already queued.
    pub fn push(&mut self, uri: Term, p: Priority) -> bool {
        if self.entries.contains_key(&uri) {
            return false;
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.order.insert((Reverse(p), seq), uri.clone());
        self.entries.insert(uri, (p, seq));
        true
    }

    /// Changes the priority of a queued URI, keeping its arrival position.
    /// Returns `false` if the URI is not queued.
    pub fn update(&mut self, uri: &Term, p: Priority) -> bool {
        let Some(entry) = self.entries.get_mut(uri) else {
            return false;
        };
        let (old, seq) = *entry;
        if old == p {
            return true;
        }
        let t = self.order.remove(&(Reverse(old), seq)).expect("queue index in sync");
        self.order.insert((Reverse(p), seq), t);
        entry.0 = p;
        true
    }

    pub fn pop(&mut self) -> Option<(Term, Priority)> {
        let ((Reverse(p), _), uri) = self.order.pop_first()?;
        self.entries.remove(&uri);
        Some((uri, p))
    }

    pub fn peek(&self) -> Option<(&Term, Priority)> {
        self.order.first_key_value().map(|((Reverse(p), _), u)| (u, *p))
    }

    pub fn priority(&self, uri: &Term) -> Option<Priority> {
        self.entries.get(uri).map(|e| e.0)
    }

    pub fn contains(&self, uri: &Term) -> bool {
        self.entries.contains_key(uri)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Queued URIs in pop order.
    pub fn iter(&self) -> impl Iterator<Item = (&Term, Priority)> {
        self.order.iter().map(|((Reverse(p), _), u)| (u, *p))
    }
}

/// How a URI came to be scheduled.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscoveryContext {
    pub parent_uri: Option<Term>,
    /// Priority the parent held when it was popped for lookup.
    pub parent_priority: Priority,
    pub is_seed: bool,
}

impl DiscoveryContext {
    pub fn seed() -> Self {
        Self {
            parent_uri: None,
            parent_priority: Priority(0.0),
            is_seed: true,
        }
    }

    pub fn child(parent: Term, parent_priority: Priority) -> Self {
        Self {
            parent_uri: Some(parent),
            parent_priority,
            is_seed: false,
        }
    }
}

/// Information flowing back from the dispatcher to the lookup side.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedbackMessage {
    IntermediateSolution {
        bindings: SolutionMapping,
        covered_count: u32,
    },
    SolutionProvenance(Vec<Term>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StrategyKind {
    Baseline,
    Random,
    Dfs,
    Bfs,
    Oracle,
    PageRank,
    Indegree,
    Is,
    IsDcr,
    Rcc1,
    Rcc2,
    Rel1,
    Rel2,
    IsRcc1,
    IsRcc2,
    IsRel1,
    IsRel2,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 17] = [
        StrategyKind::Baseline,
        StrategyKind::Random,
        StrategyKind::Dfs,
        StrategyKind::Bfs,
        StrategyKind::Oracle,
        StrategyKind::PageRank,
        StrategyKind::Indegree,
        StrategyKind::Is,
        StrategyKind::IsDcr,
        StrategyKind::Rcc1,
        StrategyKind::Rcc2,
        StrategyKind::Rel1,
        StrategyKind::Rel2,
        StrategyKind::IsRcc1,
        StrategyKind::IsRcc2,
        StrategyKind::IsRel1,
        StrategyKind::IsRel2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Baseline => "baseline",
            StrategyKind::Random => "random",
            StrategyKind::Dfs => "dfs",
            StrategyKind::Bfs => "bfs",
            StrategyKind::Oracle => "oracle",
            StrategyKind::PageRank => "pagerank",
            StrategyKind::Indegree => "indegree",
            StrategyKind::Is => "is",
            StrategyKind::IsDcr => "isdcr",
            StrategyKind::Rcc1 => "rcc1",
            StrategyKind::Rcc2 => "rcc2",
            StrategyKind::Rel1 => "rel1",
            StrategyKind::Rel2 => "rel2",
            StrategyKind::IsRcc1 => "isrcc1",
            StrategyKind::IsRcc2 => "isrcc2",
            StrategyKind::IsRel1 => "isrel1",
            StrategyKind::IsRel2 => "isrel2",
        }
    }

    /// Whether the strategy reacts to dispatcher feedback.
    pub fn uses_feedback(self) -> bool {
        !matches!(
            self,
            StrategyKind::Baseline
                | StrategyKind::Random
                | StrategyKind::Dfs
                | StrategyKind::Bfs
                | StrategyKind::Oracle
                | StrategyKind::PageRank
                | StrategyKind::Indegree
        )
    }

    fn graph_score(self) -> Option<GraphScore> {
        use GraphScore::*;
        Some(match self {
            StrategyKind::PageRank => PageRank,
            StrategyKind::Indegree => Indegree,
            StrategyKind::Rcc1 | StrategyKind::IsRcc1 => Rcc(1),
            StrategyKind::Rcc2 | StrategyKind::IsRcc2 => Rcc(2),
            StrategyKind::Rel1 | StrategyKind::IsRel1 => Rel(1),
            StrategyKind::Rel2 | StrategyKind::IsRel2 => Rel(2),
            _ => return None,
        })
    }

    fn is_hybrid(self) -> bool {
        matches!(
            self,
            StrategyKind::IsRcc1 | StrategyKind::IsRcc2 | StrategyKind::IsRel1 | StrategyKind::IsRel2
        )
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown strategy {0:?}")]
pub struct UnknownStrategy(pub String);

impl FromStr for StrategyKind {
    type Err = UnknownStrategy;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.to_ascii_lowercase();
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == lower)
            .ok_or_else(|| UnknownStrategy(s.to_string()))
    }
}

impl TryFrom<String> for StrategyKind {
    type Error = UnknownStrategy;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<StrategyKind> for String {
    fn from(k: StrategyKind) -> String {
        k.name().to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum GraphScore {
    PageRank,
    Indegree,
    Rcc(usize),
    Rel(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PriorityError {
    #[error("the oracle strategy needs a precomputed RCC map")]
    MissingRccMap,
}

/// Owns the lookup queue, the link graph and all strategy state. Every
/// mutation goes through this one value.
#[derive(Debug, Clone)]
pub struct Prioritizer {
    kind: StrategyKind,
    queue: LookupQueue,
    graph: LinkGraph,
    rng: ChaCha8Rng,
    oracle: Option<Arc<RccMap>>,
    is_score: HashMap<Term, u32>,
    known: HashSet<Term>,
    total_rcc: u64,
}

impl Prioritizer {
    pub fn new(kind: StrategyKind, seed: u64, oracle: Option<Arc<RccMap>>) -> Result<Self, PriorityError> {
        if kind == StrategyKind::Oracle && oracle.is_none() {
            return Err(PriorityError::MissingRccMap);
        }
        Ok(Self {
            kind,
            queue: LookupQueue::new(),
            graph: LinkGraph::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            oracle,
            is_score: HashMap::new(),
            known: HashSet::new(),
            total_rcc: 0,
        })
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    pub fn queue(&self) -> &LookupQueue {
        &self.queue
    }

    pub fn graph(&self) -> &LinkGraph {
        &self.graph
    }

    /// Whether the URI was ever scheduled (queued, in flight, retrieved or failed).
    pub fn is_known(&self, uri: &Term) -> bool {
        self.known.contains(uri)
    }

    pub fn initial_priority(&mut self, uri: &Term, ctx: &DiscoveryContext) -> Priority {
        let v = match self.kind {
            StrategyKind::Random => f64::from(self.rng.gen_range(1u8..=10)),
            StrategyKind::Dfs if !ctx.is_seed => ctx.parent_priority.0 + 1.0,
            StrategyKind::Bfs | StrategyKind::IsDcr if !ctx.is_seed => ctx.parent_priority.0 - 1.0,
            StrategyKind::Oracle => self
                .oracle
                .as_ref()
                .and_then(|m| m.get(uri))
                .copied()
                .unwrap_or(0) as f64,
            _ => 0.0,
        };
        Priority(v)
    }

    /// Queues a URI seen for the first time. Returns its initial priority,
    /// or `None` if the URI was scheduled before.
    pub fn discover(&mut self, uri: &Term, ctx: &DiscoveryContext) -> Option<Priority> {
        if !self.known.insert(uri.clone()) {
            return None;
        }
        let p = self.initial_priority(uri, ctx);
        self.queue.push(uri.clone(), p);
        if ctx.is_seed {
            self.graph.add_uri(uri);
        }
        Some(p)
    }

    pub fn pop(&mut self) -> Option<(Term, Priority)> {
        let (uri, p) = self.queue.pop()?;
        self.is_score.remove(&uri);
        Some((uri, p))
    }

    /// Records the outcome of looking up `uri`. `discovered` lists every URI
    /// found in matching triples of the retrieved document, with a flag
    /// telling whether that URI's document was retrieved already.
    pub fn on_lookup_complete(
        &mut self,
        uri: &Term,
        discovered: &[(Term, bool)],
        failed: bool,
    ) -> Vec<(Term, Priority)> {
        if failed {
            self.graph.remove_failed(uri);
            return self.rescore_all();
        }
        self.graph.promote(uri);
        for (t, retrieved) in discovered {
            self.graph.add_discovery(uri, t, *retrieved);
        }
        self.rescore_all()
    }

    pub fn on_feedback(&mut self, msg: &FeedbackMessage) -> Vec<(Term, Priority)> {
        match msg {
            FeedbackMessage::SolutionProvenance(docs) => {
                let before = self.graph.unknown_rcc_bumps();
                self.graph.bump_rcc(docs.iter());
                self.total_rcc += docs.len() as u64 - (self.graph.unknown_rcc_bumps() - before);
                if self.kind.uses_feedback() {
                    self.rescore_all()
                } else {
                    Vec::new()
                }
            }
            FeedbackMessage::IntermediateSolution {
                bindings,
                covered_count,
            } => match self.kind {
                StrategyKind::Is | StrategyKind::IsDcr => {
                    let cnt = Priority(f64::from(*covered_count));
                    let mut changed = Vec::new();
                    for (_, term) in bindings.iter() {
                        if let Some(p) = self.queue.priority(term) {
                            if p < cnt {
                                self.queue.update(term, cnt);
                                changed.push((term.clone(), cnt));
                            }
                        }
                    }
                    changed
                }
                k if k.is_hybrid() => {
                    let mut changed = Vec::new();
                    for (_, term) in bindings.iter() {
                        if !self.queue.contains(term) {
                            continue;
                        }
                        let s = self.is_score.entry(term.clone()).or_insert(0);
                        if *covered_count > *s {
                            *s = *covered_count;
                            if let Some(p) = self.rescore_one(term) {
                                changed.push((term.clone(), p));
                            }
                        }
                    }
                    changed
                }
                _ => Vec::new(),
            },
        }
    }

    fn score(&self, g: GraphScore, uri: &Term) -> f64 {
        match g {
            GraphScore::Indegree => self.graph.indegree(uri) as f64,
            GraphScore::Rcc(k) => self.graph.rcc_score(uri, k) as f64,
            GraphScore::Rel(k) => self.graph.rel_score(uri, k) as f64,
            GraphScore::PageRank => unreachable!("PageRank is scored in bulk"),
        }
    }

    fn target_priority(&self, g: GraphScore, uri: &Term) -> Priority {
        let s = self.score(g, uri);
        if self.kind.is_hybrid() {
            let is = self.is_score.get(uri).copied().unwrap_or(0);
            Priority(f64::from(is) * s)
        } else {
            Priority(s)
        }
    }

    fn rescore_one(&mut self, uri: &Term) -> Option<Priority> {
        let g = self.kind.graph_score()?;
        let p = self.target_priority(g, uri);
        match self.queue.priority(uri) {
            Some(old) if old != p => {
                self.queue.update(uri, p);
                Some(p)
            }
            _ => None,
        }
    }

    fn rescore_all(&mut self) -> Vec<(Term, Priority)> {
        let Some(g) = self.kind.graph_score() else {
            return Vec::new();
        };
        if matches!(g, GraphScore::Rcc(_) | GraphScore::Rel(_)) && self.total_rcc == 0 {
            // Every score is 0, which is every queued URI's current priority.
            return Vec::new();
        }
        let targets: Vec<(Term, Priority)> = match g {
            GraphScore::PageRank => {
                let pr = self
                    .graph
                    .pagerank(PAGERANK_DAMPING, PAGERANK_EPSILON, PAGERANK_MAX_ITER);
                self.queue
                    .iter()
                    .map(|(u, _)| (u.clone(), Priority(pr.get(u).copied().unwrap_or(0.0))))
                    .collect()
            }
            _ => self
                .queue
                .iter()
                .map(|(u, _)| (u.clone(), self.target_priority(g, u)))
                .collect(),
        };
        let mut changed = Vec::new();
        for (u, p) in targets {
            if self.queue.priority(&u) != Some(p) {
                self.queue.update(&u, p);
                changed.push((u, p));
            }
        }
        changed
    }
}
