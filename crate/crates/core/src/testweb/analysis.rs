use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use super::graph;
use crate::num::{mean, population_stdev};
use crate::rdf::{evaluate_bgp_with_provenance, BgpQuery, ProvenancedSolution, SourcedTriple, Term};
use crate::web::WebOfLinkedData;

/// Documents reachable from the query's seed URIs when only URIs from
/// matching triples are followed.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReachableSubweb {
    /// URIs of the reachable documents.
    pub documents: BTreeSet<Term>,
    /// Data links between reachable documents, without self-links.
    pub edges: BTreeSet<(Term, Term)>,
    /// Documents retrieved by looking up a seed URI.
    pub seed_documents: BTreeSet<Term>,
    /// Every URI that gets looked up, whether or not the lookup succeeds.
    pub looked_up: BTreeSet<Term>,
    /// Looked-up URIs that resolve to no document.
    pub failed: BTreeSet<Term>,
}

pub fn compute_reachable_subweb(web: &WebOfLinkedData, query: &BgpQuery) -> ReachableSubweb {
    let mut sub = ReachableSubweb::default();
    let mut queue: VecDeque<Term> = VecDeque::new();
    for s in query.seeds() {
        if sub.looked_up.insert(s.clone()) {
            queue.push_back(s.clone());
        }
    }
    let seeds: BTreeSet<&Term> = query.seeds().iter().collect();
    while let Some(uri) = queue.pop_front() {
        let Some(doc) = web.get(&uri) else {
            sub.failed.insert(uri);
            continue;
        };
        if seeds.contains(&uri) {
            sub.seed_documents.insert(doc.uri().clone());
        }
        if !sub.documents.insert(doc.uri().clone()) {
            continue;
        }
        for t in doc.triples().iter().filter(|t| query.matches_any(t)) {
            for x in t.uris() {
                if sub.looked_up.insert(x.clone()) {
                    queue.push_back(x.clone());
                }
            }
        }
    }
    for d in &sub.documents {
        let doc = web.get(d).expect("reachable documents exist");
        for t in doc.triples().iter().filter(|t| query.matches_any(t)) {
            for x in t.uris() {
                if let Some(target) = web.get(x) {
                    if target.uri() != d {
                        sub.edges.insert((d.clone(), target.uri().clone()));
                    }
                }
            }
        }
    }
    sub
}

/// Reachable subweb, complete bag-semantics result with provenance, and the
/// RCC of every reachable document.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub subweb: ReachableSubweb,
    pub solutions: Vec<ProvenancedSolution>,
    pub rcc: BTreeMap<Term, u64>,
}

impl GroundTruth {
    pub fn cardinality(&self) -> usize {
        self.solutions.len()
    }
}

pub fn ground_truth(web: &WebOfLinkedData, query: &BgpQuery) -> GroundTruth {
    let subweb = compute_reachable_subweb(web, query);
    let sourced: Vec<SourcedTriple> = subweb
        .documents
        .iter()
        .flat_map(|d| {
            let doc = web.get(d).expect("reachable documents exist");
            doc.triples()
                .iter()
                .filter(|t| query.matches_any(t))
                .map(move |t| SourcedTriple {
                    document: d.clone(),
                    triple: t.clone(),
                })
        })
        .collect();
    let solutions = evaluate_bgp_with_provenance(query, &sourced);
    let mut rcc: BTreeMap<Term, u64> = subweb.documents.iter().map(|d| (d.clone(), 0)).collect();
    for s in &solutions {
        for d in &s.provenance {
            *rcc.get_mut(d).expect("provenance within the subweb") += 1;
        }
    }
    GroundTruth {
        subweb,
        solutions,
        rcc,
    }
}

/// RCC of every reachable document: the number of solutions that use at
/// least one triple from it. Unreachable documents are absent.
pub fn compute_rcc(web: &WebOfLinkedData, query: &BgpQuery) -> BTreeMap<Term, u64> {
    ground_truth(web, query).rcc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStats {
    pub mean: f64,
    pub stdev: f64,
    pub min: usize,
    pub max: usize,
    pub count: usize,
}

impl PathStats {
    fn of(lengths: &[usize]) -> Option<Self> {
        let xs: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
        Some(PathStats {
            mean: mean(&xs)?,
            stdev: population_stdev(&xs)?,
            min: *lengths.iter().min()?,
            max: *lengths.iter().max()?,
            count: lengths.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubwebStats {
    pub n_docs: usize,
    pub n_edges: usize,
    pub n_scc: usize,
    pub diameter: usize,
    pub n_relevant: usize,
    pub pct_relevant: f64,
    /// Shortest-path lengths from the nearest seed document to each non-seed
    /// document with a positive RCC.
    pub relevant_paths: Option<PathStats>,
    /// Same for non-seed documents with RCC 0.
    pub irrelevant_paths: Option<PathStats>,
    pub result_cardinality: usize,
}

pub const STATS_CSV_HEADER: &str = "web,query,docs,edges,scc,diameter,relevant_docs,pct_relevant,\
rel_path_mean,rel_path_stdev,rel_path_min,rel_path_max,\
irrel_path_mean,irrel_path_stdev,irrel_path_min,irrel_path_max,cardinality";

impl SubwebStats {
    pub fn csv_row(&self, web: &str, query: &str) -> String {
        let paths = |p: &Option<PathStats>| match p {
            Some(p) => format!("{:.2},{:.2},{},{}", p.mean, p.stdev, p.min, p.max),
            None => ",,,".to_string(),
        };
        format!(
            "{web},{query},{},{},{},{},{},{:.1},{},{},{}",
            self.n_docs,
            self.n_edges,
            self.n_scc,
            self.diameter,
            self.n_relevant,
            self.pct_relevant,
            paths(&self.relevant_paths),
            paths(&self.irrelevant_paths),
            self.result_cardinality
        )
    }
}

pub fn subweb_statistics(
    subweb: &ReachableSubweb,
    rcc: &BTreeMap<Term, u64>,
    result_cardinality: usize,
) -> SubwebStats {
    let ids: HashMap<&Term, usize> = subweb.documents.iter().enumerate().map(|(i, d)| (d, i)).collect();
    let mut adj = vec![Vec::new(); ids.len()];
    for (a, b) in &subweb.edges {
        adj[ids[a]].push(ids[b]);
    }
    let seeds: Vec<usize> = subweb.seed_documents.iter().filter_map(|d| ids.get(d).copied()).collect();
    let dist = graph::bfs_distances(&adj, &seeds);

    let mut relevant = Vec::new();
    let mut irrelevant = Vec::new();
    let mut n_relevant = 0;
    for (d, &i) in &ids {
        let is_relevant = rcc.get(*d).copied().unwrap_or(0) > 0;
        if is_relevant {
            n_relevant += 1;
        }
        if subweb.seed_documents.contains(*d) {
            continue;
        }
        if let Some(l) = dist[i] {
            if is_relevant {
                relevant.push(l);
            } else {
                irrelevant.push(l);
            }
        }
    }
    let n_docs = ids.len();
    SubwebStats {
        n_docs,
        n_edges: subweb.edges.len(),
        n_scc: graph::scc_count(&adj),
        diameter: graph::diameter(&adj),
        n_relevant,
        pct_relevant: if n_docs == 0 {
            0.0
        } else {
            100.0 * n_relevant as f64 / n_docs as f64
        },
        relevant_paths: PathStats::of(&relevant),
        irrelevant_paths: PathStats::of(&irrelevant),
        result_cardinality,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rdf::{parse_ntriples, parse_query};
    use crate::web::{Document, LatencyModel};

    fn web(docs: &[(&str, &str)]) -> WebOfLinkedData {
        WebOfLinkedData::from_documents(
            docs.iter()
                .map(|(u, body)| Document::new(Term::uri(*u), parse_ntriples(body).unwrap())),
            LatencyModel::zero(),
        )
    }

    #[test]
    fn chain_of_three() {
        let w = web(&[
            ("http://x/a", "<http://x/a> <http://x/p> <http://x/b> ."),
            ("http://x/b", "<http://x/b> <http://x/p> <http://x/c> ."),
            ("http://x/c", "<http://x/c> <http://x/q> \"end\" ."),
        ]);
        let q = parse_query("?x <http://x/p> ?y .\n<http://x/a> <http://x/p> ?z").unwrap();
        let sub = compute_reachable_subweb(&w, &q);
        assert_eq!(sub.documents.len(), 3);
        assert_eq!(sub.edges.len(), 2);
        assert!(sub.failed.contains(&Term::uri("http://x/p")));
        assert_eq!(sub.seed_documents, [Term::uri("http://x/a")].into_iter().collect());
    }

    #[test]
    fn nothing_matches_beyond_seeds() {
        let w = web(&[
            ("http://x/a", "<http://x/a> <http://x/q> <http://x/b> ."),
            ("http://x/b", ""),
        ]);
        let q = parse_query("<http://x/a> <http://x/p> ?y").unwrap();
        let sub = compute_reachable_subweb(&w, &q);
        assert_eq!(sub.documents, [Term::uri("http://x/a")].into_iter().collect());
        assert!(sub.edges.is_empty());
    }

    #[test]
    fn rcc_counts_contributing_documents() {
        let w = web(&[
            ("http://x/A", "<http://x/A> <http://x/p> <http://x/B> ."),
            ("http://x/B", "<http://x/B> <http://x/q> \"v\" .\n<http://x/B> <http://x/r> <http://x/C> ."),
            ("http://x/C", "<http://x/C> <http://x/s> \"w\" ."),
        ]);
        let q = parse_query("<http://x/A> <http://x/p> ?b .\n?b <http://x/q> ?v .\n?b <http://x/r> ?c").unwrap();
        let gt = ground_truth(&w, &q);
        assert_eq!(gt.cardinality(), 1);
        assert_eq!(gt.rcc[&Term::uri("http://x/A")], 1);
        assert_eq!(gt.rcc[&Term::uri("http://x/B")], 1);
        assert_eq!(gt.rcc[&Term::uri("http://x/C")], 0);
        let total: u64 = gt.rcc.values().sum();
        let prov: usize = gt.solutions.iter().map(|s| s.provenance.len()).sum();
        assert_eq!(total as usize, prov);
    }

    #[test]
    fn statistics_of_small_subwebs() {
        let w = web(&[("http://x/a", "<http://x/a> <http://x/q> \"v\" .")]);
        let q = parse_query("<http://x/a> <http://x/q> ?v").unwrap();
        let gt = ground_truth(&w, &q);
        let st = subweb_statistics(&gt.subweb, &gt.rcc, gt.cardinality());
        assert_eq!((st.n_docs, st.n_scc, st.diameter, st.n_relevant), (1, 1, 0, 1));
        assert!(st.relevant_paths.is_none());
        let row = st.csv_row("w", "q");
        assert_eq!(row.split(',').count(), STATS_CSV_HEADER.split(',').count());

        let cyc = web(&[
            ("http://x/a", "<http://x/a> <http://x/p> <http://x/b> ."),
            ("http://x/b", "<http://x/b> <http://x/p> <http://x/c> ."),
            ("http://x/c", "<http://x/c> <http://x/p> <http://x/a> ."),
        ]);
        let q = parse_query("<http://x/a> <http://x/p> ?y .\n?y <http://x/p> ?z").unwrap();
        let gt = ground_truth(&cyc, &q);
        let st = subweb_statistics(&gt.subweb, &gt.rcc, gt.cardinality());
        assert_eq!((st.n_docs, st.n_edges, st.n_scc, st.diameter), (3, 3, 1, 2));
        let rel = st.relevant_paths.unwrap();
        assert_eq!((rel.min, rel.max, rel.count), (1, 1, 1));
        let irr = st.irrelevant_paths.unwrap();
        assert_eq!((irr.min, irr.max), (2, 2));
    }
}
