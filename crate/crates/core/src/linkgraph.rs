//! Incrementally built topology of the Web seen so far during an execution.
//!
//! Document vertices stand for retrieved documents and carry a result
//! contribution counter (RCC). URI vertices stand for URIs that are queued or
//! in flight. Edges always start at a document vertex.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;

use crate::num::Scalar;
use crate::rdf::Term;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    Uri,
    Document,
}

#[derive(Debug, Clone)]
struct Vertex {
    uri: Term,
    kind: VertexKind,
    rcc: u64,
    ins: BTreeSet<usize>,
    outs: BTreeSet<usize>,
}

#[derive(Debug, Clone, Default)]
pub struct LinkGraph {
    slots: Vec<Option<Vertex>>,
    ids: HashMap<Term, usize>,
    edges: usize,
    unknown_bumps: u64,
}

impl LinkGraph {
    pub fn new() -> Self {
        Self::default()
    }

    fn id(&self, uri: &Term) -> Option<usize> {
        self.ids.get(uri).copied()
    }

    fn v(&self, id: usize) -> &Vertex {
        self.slots[id].as_ref().expect("live vertex")
    }

    fn v_mut(&mut self, id: usize) -> &mut Vertex {
        self.slots[id].as_mut().expect("live vertex")
    }

    fn ensure(&mut self, uri: &Term, kind: VertexKind) -> usize {
        if let Some(id) = self.id(uri) {
            if kind == VertexKind::Document {
                self.v_mut(id).kind = VertexKind::Document;
            }
            return id;
        }
        let id = self.slots.len();
        self.slots.push(Some(Vertex {
            uri: uri.clone(),
            kind,
            rcc: 0,
            ins: BTreeSet::new(),
            outs: BTreeSet::new(),
        }));
        self.ids.insert(uri.clone(), id);
        id
    }

    /// Adds a vertex for a URI that is queued but not looked up yet.
    pub fn add_uri(&mut self, uri: &Term) {
        self.ensure(uri, VertexKind::Uri);
    }

    /// Records that `target` was found in the retrieved document `from_doc`.
    /// Idempotent. A document linking to itself adds no edge.
    pub fn add_discovery(&mut self, from_doc: &Term, target: &Term, target_retrieved: bool) {
        let from = self.ensure(from_doc, VertexKind::Document);
        let kind = if target_retrieved {
            VertexKind::Document
        } else {
            VertexKind::Uri
        };
        let to = self.ensure(target, kind);
        if from == to {
            return;
        }
        if self.v_mut(from).outs.insert(to) {
            self.v_mut(to).ins.insert(from);
            self.edges += 1;
        }
    }

    /// Turns the vertex of a looked-up URI into a document vertex, keeping
    /// its edges.
    pub fn promote(&mut self, uri: &Term) {
        self.ensure(uri, VertexKind::Document);
    }

    /// Deletes the vertex of a URI whose lookup failed, with its edges.
    pub fn remove_failed(&mut self, uri: &Term) {
        let Some(id) = self.ids.remove(uri) else {
            return;
        };
        let v = self.slots[id].take().expect("live vertex");
        debug_assert!(v.outs.is_empty(), "failed lookups have no out-edges");
        for src in &v.ins {
            self.v_mut(*src).outs.remove(&id);
        }
        for dst in &v.outs {
            self.v_mut(*dst).ins.remove(&id);
        }
        self.edges -= v.ins.len() + v.outs.len();
    }

    pub fn contains(&self, uri: &Term) -> bool {
        self.ids.contains_key(uri)
    }

    pub fn kind(&self, uri: &Term) -> Option<VertexKind> {
        self.id(uri).map(|id| self.v(id).kind)
    }

    pub fn vertex_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges
    }

    pub fn vertices(&self) -> impl Iterator<Item = (&Term, VertexKind)> {
        self.slots.iter().flatten().map(|v| (&v.uri, v.kind))
    }

    pub fn edges(&self) -> impl Iterator<Item = (&Term, &Term)> {
        self.slots.iter().flatten().flat_map(move |v| {
            v.outs.iter().map(move |o| (&v.uri, &self.v(*o).uri))
        })
    }

    pub fn rcc(&self, uri: &Term) -> u64 {
        self.id(uri).map(|id| self.v(id).rcc).unwrap_or(0)
    }

    /// Increments the RCC of every listed document. URIs without a document
    /// vertex are skipped and counted, see [`unknown_rcc_bumps`](Self::unknown_rcc_bumps).
    pub fn bump_rcc<'a, I: IntoIterator<Item = &'a Term>>(&mut self, provenance: I) {
        for uri in provenance {
            match self.id(uri) {
                Some(id) if self.v(id).kind == VertexKind::Document => self.v_mut(id).rcc += 1,
                _ => {
                    log::warn!("RCC feedback for unknown document {uri}");
                    self.unknown_bumps += 1;
                }
            }
        }
    }

    pub fn unknown_rcc_bumps(&self) -> u64 {
        self.unknown_bumps
    }

    pub fn indegree(&self, uri: &Term) -> usize {
        self.id(uri).map(|id| self.v(id).ins.len()).unwrap_or(0)
    }

    pub fn in_neighbors(&self, uri: &Term) -> BTreeSet<Term> {
        self.in_neighborhood(uri, 1)
    }

    fn in_neighborhood_ids(&self, id: usize, k: usize) -> BTreeSet<usize> {
        let mut acc: BTreeSet<usize> = self.v(id).ins.clone();
        let mut frontier: Vec<usize> = acc.iter().copied().collect();
        for _ in 1..k {
            let mut next = Vec::new();
            for f in frontier {
                for &p in &self.v(f).ins {
                    if acc.insert(p) {
                        next.push(p);
                    }
                }
            }
            frontier = next;
        }
        acc
    }

    /// `in^1(v)` is the set of vertices with an edge to `v`; `in^k(v)` adds
    /// `in^1` of every member of `in^(k-1)(v)`. `v` itself is included only
    /// if a cycle leads back to it.
    pub fn in_neighborhood(&self, uri: &Term, k: usize) -> BTreeSet<Term> {
        match self.id(uri) {
            Some(id) => self
                .in_neighborhood_ids(id, k)
                .into_iter()
                .map(|i| self.v(i).uri.clone())
                .collect(),
            None => BTreeSet::new(),
        }
    }

    /// Sum of the RCCs of the document vertices in `in^k(uri)`.
    pub fn rcc_score(&self, uri: &Term, k: usize) -> u64 {
        self.id(uri)
            .map(|id| {
                self.in_neighborhood_ids(id, k)
                    .into_iter()
                    .map(|i| self.v(i))
                    .filter(|v| v.kind == VertexKind::Document)
                    .map(|v| v.rcc)
                    .sum()
            })
            .unwrap_or(0)
    }

    /// Number of document vertices in `in^k(uri)` with a positive RCC.
    pub fn rel_score(&self, uri: &Term, k: usize) -> u64 {
        self.id(uri)
            .map(|id| {
                self.in_neighborhood_ids(id, k)
                    .into_iter()
                    .map(|i| self.v(i))
                    .filter(|v| v.kind == VertexKind::Document && v.rcc > 0)
                    .count() as u64
            })
            .unwrap_or(0)
    }

    /// Power iteration with uniform teleportation; the mass of vertices
    /// without out-edges is spread uniformly over all vertices.
    pub fn pagerank<F: Scalar>(&self, damping: F, epsilon: F, max_iter: usize) -> HashMap<Term, F> {
        let live: Vec<usize> = (0..self.slots.len()).filter(|i| self.slots[*i].is_some()).collect();
        let n = live.len();
        if n == 0 {
            return HashMap::new();
        }
        let mut dense = vec![usize::MAX; self.slots.len()];
        for (d, &id) in live.iter().enumerate() {
            dense[id] = d;
        }
        let outs: Vec<Vec<usize>> = live
            .iter()
            .map(|&id| self.v(id).outs.iter().map(|o| dense[*o]).collect())
            .collect();
        let nf = F::of_usize(n);
        let mut rank = vec![F::one() / nf; n];
        let teleport = (F::one() - damping) / nf;
        for _ in 0..max_iter {
            let dangling: F = (0..n)
                .filter(|&i| outs[i].is_empty())
                .map(|i| rank[i])
                .sum();
            let base = teleport + damping * dangling / nf;
            let mut next = vec![base; n];
            for (i, targets) in outs.iter().enumerate() {
                if targets.is_empty() {
                    continue;
                }
                let share = damping * rank[i] / F::of_usize(targets.len());
                for &t in targets {
                    next[t] = next[t] + share;
                }
            }
            let delta: F = rank.iter().zip(&next).map(|(a, b)| (*a - *b).abs()).sum();
            rank = next;
            if delta < epsilon {
                break;
            }
        }
        live.iter()
            .zip(rank)
            .map(|(&id, r)| (self.v(id).uri.clone(), r))
            .collect()
    }

    /// Graphviz rendering; document vertices are boxes labelled with their RCC.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph linkgraph {\n");
        let mut order: Vec<&Vertex> = self.slots.iter().flatten().collect();
        order.sort_by(|a, b| a.uri.cmp(&b.uri));
        for v in &order {
            let name = escape(v.uri.lexical());
            match v.kind {
                VertexKind::Document => {
                    let _ = writeln!(out, "  \"{name}\" [shape=box, label=\"{name}\\nrcc={}\"];", v.rcc);
                }
                VertexKind::Uri => {
                    let _ = writeln!(out, "  \"{name}\" [shape=ellipse];");
                }
            }
        }
        let mut edges: Vec<(&Term, &Term)> = self.edges().collect();
        edges.sort();
        for (a, b) in edges {
            let _ = writeln!(out, "  \"{}\" -> \"{}\";", escape(a.lexical()), escape(b.lexical()));
        }
        out.push_str("}\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
