//! State of the data-retrieval operator apart from the lookups themselves.

use std::collections::BTreeSet;

use super::{scan_document, ExecutionStats, PopRecord};
use crate::priority::{DiscoveryContext, FeedbackMessage, Prioritizer, Priority};
use crate::rdf::{BgpQuery, Term, Triple};
use crate::web::Lookup;

pub(crate) struct Completed {
    /// URI of the retrieved document, if the lookup produced one that was
    /// not scanned before.
    pub document: Option<Term>,
    pub matching: Vec<(usize, Triple)>,
    /// URIs queued for the first time because of this document.
    pub new_uris: Vec<Term>,
    pub n_triples: Option<u64>,
}

pub(crate) struct Retrieval {
    pub prio: Prioritizer,
    record_pops: bool,
    scanned: BTreeSet<Term>,
    retrieved_uris: BTreeSet<Term>,
    pub lookup_order: Vec<Term>,
    pub failed: BTreeSet<Term>,
    pub pops: Vec<PopRecord>,
    pub first_provenance_pop: Option<usize>,
}

impl Retrieval {
    pub fn new(mut prio: Prioritizer, query: &BgpQuery, record_pops: bool) -> Self {
        for s in query.seeds() {
            prio.discover(s, &DiscoveryContext::seed());
        }
        Self {
            prio,
            record_pops,
            scanned: BTreeSet::new(),
            retrieved_uris: BTreeSet::new(),
            lookup_order: Vec::new(),
            failed: BTreeSet::new(),
            pops: Vec::new(),
            first_provenance_pop: None,
        }
    }

    pub fn apply_feedback(&mut self, msg: &FeedbackMessage) {
        if matches!(msg, FeedbackMessage::SolutionProvenance(_)) && self.first_provenance_pop.is_none() {
            self.first_provenance_pop = Some(self.lookup_order.len());
        }
        self.prio.on_feedback(msg);
    }

    pub fn pop(&mut self) -> Option<(Term, Priority)> {
        let (uri, p) = self.prio.pop()?;
        self.lookup_order.push(uri.clone());
        if self.record_pops {
            self.pops.push(PopRecord {
                uri: uri.clone(),
                priority: p,
                queued: self.prio.queue().iter().map(|(u, q)| (u.clone(), q)).collect(),
            });
        }
        Some((uri, p))
    }

    pub fn complete(&mut self, uri: &Term, popped: Priority, lookup: &Lookup, query: &BgpQuery) -> Completed {
        let Some(doc) = lookup.document() else {
            if let Err(e) = &lookup.outcome {
                log::warn!("lookup of {uri} failed: {e}");
            }
            self.failed.insert(uri.clone());
            self.prio.on_lookup_complete(uri, &[], true);
            return Completed {
                document: None,
                matching: Vec::new(),
                new_uris: Vec::new(),
                n_triples: None,
            };
        };
        self.retrieved_uris.insert(uri.clone());
        let n_triples = Some(doc.len() as u64);
        if !self.scanned.insert(doc.uri().clone()) {
            self.prio.on_lookup_complete(uri, &[], false);
            return Completed {
                document: None,
                matching: Vec::new(),
                new_uris: Vec::new(),
                n_triples,
            };
        }
        let scan = scan_document(doc, query);
        let mut discovered = Vec::with_capacity(scan.uris.len());
        let mut new_uris = Vec::new();
        for x in scan.uris {
            if self.prio.discover(&x, &DiscoveryContext::child(uri.clone(), popped)).is_some() {
                new_uris.push(x.clone());
            }
            let retrieved = self.retrieved_uris.contains(&x);
            discovered.push((x, retrieved));
        }
        self.prio.on_lookup_complete(uri, &discovered, false);
        Completed {
            document: Some(doc.uri().clone()),
            matching: scan.matching,
            new_uris,
            n_triples,
        }
    }

    pub fn fill_stats(&mut self, stats: &mut ExecutionStats) {
        stats.lookup_order = std::mem::take(&mut self.lookup_order);
        stats.failed_lookups = std::mem::take(&mut self.failed);
        stats.retrieved_documents = std::mem::take(&mut self.scanned);
        stats.pops = std::mem::take(&mut self.pops);
        stats.first_provenance_pop = self.first_provenance_pop;
    }
}
