//! Reference evaluation of basic graph patterns by nested loops.
//!
//! This is the ground truth the engine is checked against: it knows nothing
//! about operators, timestamps or routing, only `match_triple` and
//! `merge_compatible`.

use std::collections::BTreeSet;

use super::{BgpQuery, SolutionMapping, Term, Triple};

/// A triple together with the document it was read from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SourcedTriple {
    pub document: Term,
    pub triple: Triple,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProvenancedSolution {
    pub mapping: SolutionMapping,
    /// Documents that supplied at least one triple used by the solution.
    pub provenance: BTreeSet<Term>,
}

/// Bag-semantics evaluation over a triple multiset.
pub fn evaluate_bgp(query: &BgpQuery, triples: &[Triple]) -> Vec<SolutionMapping> {
    let mut partial = vec![SolutionMapping::new()];
    for tp in query.patterns() {
        let matches: Vec<SolutionMapping> =
            triples.iter().filter_map(|t| tp.match_triple(t)).collect();
        let mut next = Vec::new();
        for mu in &partial {
            for m in &matches {
                if let Some(merged) = mu.merge_compatible(m) {
                    next.push(merged);
                }
            }
        }
        partial = next;
        if partial.is_empty() {
            break;
        }
    }
    partial
}

/// Bag-semantics evaluation that also records, per solution, the set of
/// documents whose triples were used.
pub fn evaluate_bgp_with_provenance(
    query: &BgpQuery,
    triples: &[SourcedTriple],
) -> Vec<ProvenancedSolution> {
    let mut partial = vec![ProvenancedSolution {
        mapping: SolutionMapping::new(),
        provenance: BTreeSet::new(),
    }];
    for tp in query.patterns() {
        let matches: Vec<(SolutionMapping, &Term)> = triples
            .iter()
            .filter_map(|st| tp.match_triple(&st.triple).map(|m| (m, &st.document)))
            .collect();
        let mut next = Vec::new();
        for sol in &partial {
            for (m, doc) in &matches {
                if let Some(merged) = sol.mapping.merge_compatible(m) {
                    let mut provenance = sol.provenance.clone();
                    provenance.insert((*doc).clone());
                    next.push(ProvenancedSolution {
                        mapping: merged,
                        provenance,
                    });
                }
            }
        }
        partial = next;
        if partial.is_empty() {
            break;
        }
    }
    partial
}
