//! Operator state shared by both runners: triple-pattern operators with
//! their timestamped indexes, dispatcher routing, and document scanning.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rdf::{BgpQuery, SolutionMapping, Term, Triple, TriplePattern, Var};
use crate::web::Document;

/// Which triple-pattern operators an intermediate solution has passed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Covered(pub u64);

impl Covered {
    pub fn single(i: usize) -> Self {
        Covered(1 << i)
    }

    pub fn with(self, i: usize) -> Self {
        Covered(self.0 | (1 << i))
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 & (1 << i) != 0
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_full(self, n: usize) -> bool {
        self.count() as usize == n
    }

    pub fn unset(self, n: usize) -> impl Iterator<Item = usize> {
        (0..n).filter(move |i| !self.contains(*i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntermediateSolution {
    pub mapping: SolutionMapping,
    pub covered: Covered,
    pub timestamp: u64,
    pub provenance: Arc<BTreeSet<Term>>,
}

/// A document's triples that match some pattern, and the URIs they mention.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScanResult {
    /// Every (pattern index, triple) pair with a match. A triple matching
    /// several patterns appears once per pattern.
    pub matching: Vec<(usize, Triple)>,
    /// URIs occurring in matching triples, in first-occurrence order.
    pub uris: Vec<Term>,
}

pub fn scan_document(doc: &Document, query: &BgpQuery) -> ScanResult {
    let mut out = ScanResult::default();
    let mut seen: HashSet<&Term> = HashSet::new();
    for t in doc.triples() {
        let mut any = false;
        for i in query.matching_patterns(t) {
            out.matching.push((i, t.clone()));
            any = true;
        }
        if any {
            for u in t.uris() {
                if seen.insert(u) {
                    out.uris.push(u.clone());
                }
            }
        }
    }
    out
}

#[derive(Debug, Clone)]
struct Entry {
    mapping: SolutionMapping,
    timestamp: u64,
    provenance: Arc<BTreeSet<Term>>,
}

/// One triple-pattern operator: an index of the initial intermediate
/// solutions built from its matching triples, probed by intermediate
/// solutions routed to it.
#[derive(Debug, Clone)]
pub struct TpOp {
    position: usize,
    pattern: TriplePattern,
    vars: Vec<Var>,
    entries: Vec<Entry>,
    index: HashMap<(Var, Term), Vec<usize>>,
    distinct: Option<HashSet<SolutionMapping>>,
    received: u64,
    returned: u64,
}

impl TpOp {
    pub fn new(position: usize, pattern: TriplePattern, set_semantics: bool) -> Self {
        let vars = pattern.vars();
        Self {
            position,
            pattern,
            vars,
            entries: Vec::new(),
            index: HashMap::new(),
            distinct: set_semantics.then(HashSet::new),
            received: 0,
            returned: 0,
        }
    }

    pub fn position(&self) -> usize {
        self.position
    }

    pub fn pattern(&self) -> &TriplePattern {
        &self.pattern
    }

    pub fn received(&self) -> u64 {
        self.received
    }

    pub fn returned(&self) -> u64 {
        self.returned
    }

    /// Turns a matching triple into an initial intermediate solution and
    /// indexes it. `timestamp` is only called when a solution is produced.
    /// Under set semantics a mapping already indexed yields `None`.
    pub fn ingest(
        &mut self,
        triple: &Triple,
        document: &Term,
        timestamp: impl FnOnce() -> u64,
    ) -> Option<IntermediateSolution> {
        let mapping = self.pattern.match_triple(triple)?;
        if let Some(d) = &mut self.distinct {
            if !d.insert(mapping.clone()) {
                return None;
            }
        }
        let ts = timestamp();
        let provenance = Arc::new(BTreeSet::from([document.clone()]));
        let id = self.entries.len();
        for (v, t) in mapping.iter() {
            self.index.entry((v.clone(), t.clone())).or_default().push(id);
        }
        self.entries.push(Entry {
            mapping: mapping.clone(),
            timestamp: ts,
            provenance: Arc::clone(&provenance),
        });
        Some(IntermediateSolution {
            mapping,
            covered: Covered::single(self.position),
            timestamp: ts,
            provenance,
        })
    }

    /// Joins `incoming` with every indexed initial solution that is older
    /// and compatible.
    pub fn probe(&mut self, incoming: &IntermediateSolution) -> Vec<IntermediateSolution> {
        debug_assert!(!incoming.covered.contains(self.position));
        self.received += 1;
        let shortest = self
            .vars
            .iter()
            .filter_map(|v| incoming.mapping.get(v).map(|t| (v, t)))
            .map(|(v, t)| {
                self.index
                    .get(&(v.clone(), t.clone()))
                    .map(Vec::as_slice)
                    .unwrap_or(&[])
            })
            .min_by_key(|c| c.len());
        let all: Vec<usize>;
        let candidates: &[usize] = match shortest {
            Some(c) => c,
            None => {
                all = (0..self.entries.len()).collect();
                &all
            }
        };
        let mut out = Vec::new();
        for &id in candidates {
            let e = &self.entries[id];
            if e.timestamp >= incoming.timestamp {
                continue;
            }
            if let Some(mapping) = incoming.mapping.merge_compatible(&e.mapping) {
                let provenance = if e.provenance.is_subset(&incoming.provenance) {
                    Arc::clone(&incoming.provenance)
                } else {
                    Arc::new(incoming.provenance.union(&e.provenance).cloned().collect())
                };
                out.push(IntermediateSolution {
                    mapping,
                    covered: incoming.covered.with(self.position),
                    timestamp: incoming.timestamp,
                    provenance,
                });
            }
        }
        self.returned += out.len() as u64;
        out
    }
}

/// Incoming intermediate solutions processed per solution returned.
/// Infinite if nothing came back yet; 1 before any input.
pub fn selectivity(received: u64, returned: u64) -> f64 {
    match (received, returned) {
        (0, _) => 1.0,
        (_, 0) => f64::INFINITY,
        (r, o) => r as f64 / o as f64,
    }
}

/// What the dispatcher may know about an operator when routing.
pub trait RoutingView {
    fn vars(&self) -> &[Var];
    fn index_size(&self) -> usize;
    fn selectivity(&self) -> f64;

    /// Number of pattern variables that `mu` leaves unbound.
    fn unbound_vars(&self, mu: &SolutionMapping) -> usize {
        self.vars().iter().filter(|v| !mu.contains(v)).count()
    }

    fn bound_vars(&self, mu: &SolutionMapping) -> usize {
        self.vars().len() - self.unbound_vars(mu)
    }
}

impl RoutingView for TpOp {
    fn vars(&self) -> &[Var] {
        &self.vars
    }

    fn index_size(&self) -> usize {
        self.entries.len()
    }

    fn selectivity(&self) -> f64 {
        selectivity(self.received, self.returned)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Filter {
    LeastUnbound,
    LeastIndex,
    MostIndex,
    MostBound,
    LeastSelectivity,
    MostSelectivity,
}

/// How the dispatcher picks the next operator for an intermediate solution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RoutingPolicy {
    Lr,
    LrLi,
    LrMi,
    LrMc,
    LrMcLi,
    LrMcMi,
    LrMcLs,
    LrMcMs,
    /// Visit operators in this fixed order of pattern positions.
    Static(Vec<usize>),
}

impl RoutingPolicy {
    pub const ADAPTIVE: [RoutingPolicy; 8] = [
        RoutingPolicy::Lr,
        RoutingPolicy::LrLi,
        RoutingPolicy::LrMi,
        RoutingPolicy::LrMc,
        RoutingPolicy::LrMcLi,
        RoutingPolicy::LrMcMi,
        RoutingPolicy::LrMcLs,
        RoutingPolicy::LrMcMs,
    ];

    fn filters(&self) -> &'static [Filter] {
        use Filter::*;
        match self {
            RoutingPolicy::Lr => &[LeastUnbound],
            RoutingPolicy::LrLi => &[LeastUnbound, LeastIndex],
            RoutingPolicy::LrMi => &[LeastUnbound, MostIndex],
            RoutingPolicy::LrMc => &[LeastUnbound, MostBound],
            RoutingPolicy::LrMcLi => &[LeastUnbound, MostBound, LeastIndex],
            RoutingPolicy::LrMcMi => &[LeastUnbound, MostBound, MostIndex],
            RoutingPolicy::LrMcLs => &[LeastUnbound, MostBound, LeastSelectivity],
            RoutingPolicy::LrMcMs => &[LeastUnbound, MostBound, MostSelectivity],
            RoutingPolicy::Static(_) => &[],
        }
    }

    pub fn validate(&self, n_patterns: usize) -> Result<(), RoutingError> {
        if let RoutingPolicy::Static(order) = self {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..n_patterns).collect::<Vec<_>>() {
                return Err(RoutingError::NotAPermutation {
                    order: order.clone(),
                    n_patterns,
                });
            }
        }
        Ok(())
    }

    /// Operators the policy considers equally good for `is`. Never empty
    /// while `is` has an unset bit.
    pub fn candidates<V: RoutingView>(&self, is: &IntermediateSolution, ops: &[V]) -> Vec<usize> {
        let mut cands: Vec<usize> = is.covered.unset(ops.len()).collect();
        if let RoutingPolicy::Static(order) = self {
            return order
                .iter()
                .copied()
                .find(|i| !is.covered.contains(*i))
                .into_iter()
                .collect();
        }
        for f in self.filters() {
            if cands.len() <= 1 {
                break;
            }
            let key = |i: usize| -> f64 {
                let op = &ops[i];
                match f {
                    Filter::LeastUnbound => -(op.unbound_vars(&is.mapping) as f64),
                    Filter::LeastIndex => -(op.index_size() as f64),
                    Filter::MostIndex => op.index_size() as f64,
                    Filter::MostBound => op.bound_vars(&is.mapping) as f64,
                    Filter::LeastSelectivity => -op.selectivity(),
                    Filter::MostSelectivity => op.selectivity(),
                }
            };
            let best = cands
                .iter()
                .map(|&i| key(i))
                .max_by(|a, b| a.total_cmp(b))
                .expect("non-empty candidates");
            cands.retain(|&i| key(i).total_cmp(&best).is_eq());
        }
        cands
    }

    /// Picks the target operator, breaking remaining ties uniformly at random.
    pub fn route<V: RoutingView, R: Rng>(&self, is: &IntermediateSolution, ops: &[V], rng: &mut R) -> usize {
        let cands = self.candidates(is, ops);
        *cands.choose(rng).expect("an unset bit exists")
    }
}

impl fmt::Display for RoutingPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            RoutingPolicy::Lr => "lr",
            RoutingPolicy::LrLi => "lr-li",
            RoutingPolicy::LrMi => "lr-mi",
            RoutingPolicy::LrMc => "lr-mc",
            RoutingPolicy::LrMcLi => "lr-mc-li",
            RoutingPolicy::LrMcMi => "lr-mc-mi",
            RoutingPolicy::LrMcLs => "lr-mc-ls",
            RoutingPolicy::LrMcMs => "lr-mc-ms",
            RoutingPolicy::Static(order) => {
                let parts: Vec<String> = order.iter().map(|i| i.to_string()).collect();
                return write!(f, "static:{}", parts.join(","));
            }
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RoutingError {
    #[error("unknown routing policy {0:?}")]
    Unknown(String),
    #[error("static order {order:?} is not a permutation of 0..{n_patterns}")]
    NotAPermutation { order: Vec<usize>, n_patterns: usize },
}

impl FromStr for RoutingPolicy {
    type Err = RoutingError;

    /// Accepts the policy names plus `static:2,0,1` for a fixed order.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        if let Some(rest) = lower.strip_prefix("static:") {
            let order = rest
                .split(',')
                .map(|p| p.trim().parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| RoutingError::Unknown(s.to_string()))?;
            return Ok(RoutingPolicy::Static(order));
        }
        RoutingPolicy::ADAPTIVE
            .into_iter()
            .find(|p| p.to_string() == lower)
            .ok_or_else(|| RoutingError::Unknown(s.to_string()))
    }
}

impl TryFrom<String> for RoutingPolicy {
    type Error = RoutingError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<RoutingPolicy> for String {
    fn from(p: RoutingPolicy) -> String {
        p.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::{parse_ntriples, parse_query, PatternTerm};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn u(s: &str) -> Term {
        Term::uri(format!("http://ex.org/{s}"))
    }

    fn t(s: &str, p: &str, o: &str) -> Triple {
        Triple::new(u(s), u(p), u(o)).unwrap()
    }

    fn mapping(pairs: &[(&str, &str)]) -> SolutionMapping {
        SolutionMapping::from_pairs(pairs.iter().map(|(v, x)| (Var::new(v), u(x)))).unwrap()
    }

    fn is(pairs: &[(&str, &str)], covered: Covered, ts: u64) -> IntermediateSolution {
        IntermediateSolution {
            mapping: mapping(pairs),
            covered,
            timestamp: ts,
            provenance: Arc::new(BTreeSet::from([u("d")])),
        }
    }

    #[test]
    fn ingest_indexes_by_binding() {
        let pat = TriplePattern::new(PatternTerm::var("x"), u("p"), PatternTerm::var("y"));
        let mut op = TpOp::new(1, pat, false);
        let out = op.ingest(&t("a", "p", "b"), &u("d1"), || 5).unwrap();
        assert_eq!(out.mapping, mapping(&[("x", "a"), ("y", "b")]));
        assert_eq!(out.covered, Covered::single(1));
        assert_eq!(out.timestamp, 5);
        assert!(op.index.contains_key(&(Var::new("x"), u("a"))));
        assert!(op.index.contains_key(&(Var::new("y"), u("b"))));
        let again = op.ingest(&t("a", "p", "b"), &u("d2"), || 6).unwrap();
        assert_eq!(again.timestamp, 6);
        assert_eq!(op.index_size(), 2);

        let mut set = TpOp::new(0, op.pattern().clone(), true);
        assert!(set.ingest(&t("a", "p", "b"), &u("d1"), || 1).is_some());
        assert!(set.ingest(&t("a", "p", "b"), &u("d2"), || 2).is_none());
    }

    #[test]
    fn probe_respects_timestamps_and_bindings() {
        let pat = TriplePattern::new(PatternTerm::var("x"), u("q"), PatternTerm::var("z"));
        let mut op = TpOp::new(1, pat, false);
        op.ingest(&t("a", "q", "c"), &u("d2"), || 3);
        let merged = op.probe(&is(&[("x", "a"), ("y", "b")], Covered::single(0), 7));
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].timestamp, 7);
        assert!(merged[0].covered.is_full(2));
        assert_eq!(merged[0].provenance.len(), 2);

        let mut late = TpOp::new(1, op.pattern().clone(), false);
        late.ingest(&t("a", "q", "c"), &u("d2"), || 9);
        assert!(late.probe(&is(&[("x", "a")], Covered::single(0), 7)).is_empty());
        assert!(op.probe(&is(&[("x", "c")], Covered::single(0), 7)).is_empty());
        assert_eq!((op.received(), op.returned()), (2, 1));
    }

    #[test]
    fn scan_reports_each_pattern_match() {
        let q = parse_query("?x <http://ex.org/p> ?y .\n?a ?b ?c .\n?x <http://ex.org/p> <http://ex.org/b>")
            .unwrap();
        let doc = Document::new(
            u("a"),
            parse_ntriples("<http://ex.org/a> <http://ex.org/p> <http://ex.org/b> .\n<http://ex.org/a> <http://ex.org/r> \"lit\" .")
                .unwrap(),
        );
        let s = scan_document(&doc, &q);
        assert_eq!(s.matching.iter().filter(|(_, tr)| tr.o == u("b")).count(), 3);
        assert_eq!(s.uris, vec![u("a"), u("p"), u("b"), u("r")]);

        let narrow = parse_query("?x <http://ex.org/r> ?y").unwrap();
        let s = scan_document(&doc, &narrow);
        assert_eq!(s.matching.len(), 1);
        assert_eq!(s.uris, vec![u("a"), u("r")]);
    }

    fn ops_for(q: &str) -> Vec<TpOp> {
        parse_query(q)
            .unwrap()
            .patterns()
            .iter()
            .enumerate()
            .map(|(i, p)| TpOp::new(i, p.clone(), false))
            .collect()
    }

    #[test]
    fn policies_filter_as_named() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ops = ops_for("?x <http://ex.org/p> ?y .\n?y <http://ex.org/q> ?z .\n?x <http://ex.org/r> ?w");
        let x_bound = is(&[("x", "a")], Covered::single(1), 1);
        // op2 has one unbound variable (w), op0 has one (y): both kept.
        let mut c = RoutingPolicy::Lr.candidates(&x_bound, &ops);
        c.sort();
        assert_eq!(c, vec![0, 2]);

        let only = is(&[("x", "a"), ("y", "b")], Covered(0b011), 1);
        assert_eq!(RoutingPolicy::LrMcMs.route(&only, &ops, &mut rng), 2);

        let stat = RoutingPolicy::Static(vec![2, 0, 1]);
        assert_eq!(stat.candidates(&is(&[("x", "a")], Covered::single(2), 1), &ops), vec![0]);
    }

    #[test]
    fn index_and_selectivity_filters() {
        let mut ops = ops_for("?x <http://ex.org/p> ?y .\n?x <http://ex.org/q> ?z .\n?x <http://ex.org/s> ?v");
        for i in 0..5 {
            ops[1].ingest(&t(&format!("a{i}"), "q", "b"), &u("d"), || i);
        }
        for i in 0..2 {
            ops[2].ingest(&t(&format!("a{i}"), "s", "b"), &u("d"), || 10 + i);
        }
        let from0 = is(&[("x", "zz"), ("y", "b")], Covered::single(0), 100);
        assert_eq!(RoutingPolicy::LrMi.candidates(&from0, &ops), vec![1]);
        assert_eq!(RoutingPolicy::LrLi.candidates(&from0, &ops), vec![2]);

        ops[1].received = 10;
        ops[1].returned = 5;
        ops[2].received = 10;
        ops[2].returned = 20;
        assert_eq!(RoutingPolicy::LrMcLs.candidates(&from0, &ops), vec![2]);
        assert_eq!(RoutingPolicy::LrMcMs.candidates(&from0, &ops), vec![1]);
    }

    #[test]
    fn policy_names_parse() {
        for p in RoutingPolicy::ADAPTIVE {
            assert_eq!(p.to_string().parse::<RoutingPolicy>().unwrap(), p);
        }
        assert_eq!(
            "static:2,0,1".parse::<RoutingPolicy>().unwrap(),
            RoutingPolicy::Static(vec![2, 0, 1])
        );
        assert!(RoutingPolicy::Static(vec![0, 0]).validate(2).is_err());
        assert!("lr-xx".parse::<RoutingPolicy>().is_err());
    }
}
