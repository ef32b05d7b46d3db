//! Synthetic Webs built from a base dataset, and the ground truth computed
//! over them (reachable subwebs, RCCs, link-graph statistics).
//!
//! Every triple whose object is a URI of the base dataset is placed into the
//! documents of both its subject and object with probability `phi1`;
//! otherwise into the subject's document with probability `phi2`, and into
//! the object's document in the remaining case. Triples with a literal object
//! always go to the subject's document.

mod analysis;
pub mod graph;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rdf::{parse_ntriples, ParseError, Term, Triple};
use crate::web::{Document, GeneratorInfo, LatencyModel, WebOfLinkedData};

pub use analysis::{
    compute_rcc, compute_reachable_subweb, ground_truth, subweb_statistics, GroundTruth, PathStats,
    ReachableSubweb, SubwebStats, STATS_CSV_HEADER,
};

#[derive(Debug, Error)]
pub enum BaseError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("subject {0} is not a URI")]
    NonUriSubject(Term),
    #[error("object {object} of a triple about {subject} is neither a literal nor a subject of the dataset")]
    DanglingObject { subject: Term, object: Term },
    #[error("probability {name}={value} outside [0, 1]")]
    Probability { name: &'static str, value: f64 },
}

/// The dataset test Webs are cut from. Every subject is a URI, and every
/// object is either a literal or one of the subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseDataset {
    triples: BTreeSet<Triple>,
    entity_uris: BTreeSet<Term>,
}

impl BaseDataset {
    pub fn new(triples: BTreeSet<Triple>) -> Result<Self, BaseError> {
        let mut entity_uris = BTreeSet::new();
        for t in &triples {
            if !t.s.is_uri() {
                return Err(BaseError::NonUriSubject(t.s.clone()));
            }
            entity_uris.insert(t.s.clone());
        }
        for t in &triples {
            if !(t.o.is_literal() || entity_uris.contains(&t.o)) {
                return Err(BaseError::DanglingObject {
                    subject: t.s.clone(),
                    object: t.o.clone(),
                });
            }
        }
        Ok(Self {
            triples,
            entity_uris,
        })
    }

    pub fn from_ntriples(text: &str) -> Result<Self, BaseError> {
        Self::new(parse_ntriples(text)?)
    }

    pub fn triples(&self) -> &BTreeSet<Triple> {
        &self.triples
    }

    pub fn entity_uris(&self) -> &BTreeSet<Term> {
        &self.entity_uris
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestWebConfig {
    pub phi1: f64,
    pub phi2: f64,
    pub seed: u64,
}

impl TestWebConfig {
    pub fn new(phi1: f64, phi2: f64, seed: u64) -> Result<Self, BaseError> {
        for (name, value) in [("phi1", phi1), ("phi2", phi2)] {
            if !(0.0..=1.0).contains(&value) {
                return Err(BaseError::Probability { name, value });
            }
        }
        Ok(Self { phi1, phi2, seed })
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// Short name such as `w62_47`, or `w100` for `phi1 = 1`.
    pub fn label(&self) -> String {
        let pct = |v: f64| (v * 100.0).round() as u32;
        if self.phi1 >= 1.0 {
            "w100".to_string()
        } else {
            format!("w{}_{}", pct(self.phi1), pct(self.phi2))
        }
    }
}

impl From<TestWebConfig> for GeneratorInfo {
    fn from(c: TestWebConfig) -> Self {
        GeneratorInfo {
            phi1: c.phi1,
            phi2: c.phi2,
            seed: c.seed,
        }
    }
}

/// The fourteen link-placement settings: phi1 in {0, .33, .66} crossed with
/// phi2 in {0, .33, .66, 1}, then phi1 = 1, then (0.62, 0.47). Seeds are 0.
pub fn standard_config_suite() -> Vec<TestWebConfig> {
    let mut out = Vec::with_capacity(14);
    for phi1 in [0.0, 0.33, 0.66] {
        for phi2 in [0.0, 0.33, 0.66, 1.0] {
            out.push(TestWebConfig { phi1, phi2, seed: 0 });
        }
    }
    out.push(TestWebConfig {
        phi1: 1.0,
        phi2: 0.0,
        seed: 0,
    });
    out.push(TestWebConfig {
        phi1: 0.62,
        phi2: 0.47,
        seed: 0,
    });
    out
}

/// Where a URI-object triple was placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    Both,
    SubjectOnly,
    ObjectOnly,
}

/// URI-object triples in the order the generator draws for them, with the
/// placement each one receives under `cfg`.
pub fn placements(base: &BaseDataset, cfg: &TestWebConfig) -> Vec<(Triple, Placement)> {
    let mut linked: Vec<(String, &Triple)> = base
        .triples
        .iter()
        .filter(|t| t.o.is_uri())
        .map(|t| (t.to_ntriples(), t))
        .collect();
    linked.sort();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    linked
        .into_iter()
        .map(|(_, t)| {
            let u1: f64 = rng.gen();
            let u2: f64 = rng.gen();
            let p = if u1 < cfg.phi1 {
                Placement::Both
            } else if u2 < cfg.phi2 {
                Placement::SubjectOnly
            } else {
                Placement::ObjectOnly
            };
            (t.clone(), p)
        })
        .collect()
}

/// Builds a test Web with one document per entity URI of `base`.
pub fn generate_testweb(base: &BaseDataset, cfg: &TestWebConfig, latency: LatencyModel) -> WebOfLinkedData {
    let mut docs: BTreeMap<&Term, BTreeSet<Triple>> =
        base.entity_uris.iter().map(|u| (u, BTreeSet::new())).collect();
    let mut put = |owner: &Term, t: &Triple| {
        docs.get_mut(owner)
            .expect("owner is an entity URI")
            .insert(t.clone());
    };
    for t in base.triples.iter().filter(|t| t.o.is_literal()) {
        put(&t.s, t);
    }
    for (t, placement) in placements(base, cfg) {
        match placement {
            Placement::Both => {
                put(&t.s, &t);
                put(&t.o, &t);
            }
            Placement::SubjectOnly => put(&t.s, &t),
            Placement::ObjectOnly => put(&t.o, &t),
        }
    }
    let mut web = WebOfLinkedData::from_documents(
        docs.into_iter().map(|(u, ts)| Document::new(u.clone(), ts)),
        latency,
    );
    web.set_generator(Some((*cfg).into()));
    web
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> BaseDataset {
        BaseDataset::from_ntriples(
            "<http://b/a> <http://b/p> <http://b/b> .\n\
             <http://b/b> <http://b/p> <http://b/c> .\n\
             <http://b/c> <http://b/p> <http://b/a> .\n\
             <http://b/a> <http://b/name> \"A\" .\n\
             <http://b/c> <http://b/name> \"C\" .\n",
        )
        .unwrap()
    }

    fn holders(web: &WebOfLinkedData, t: &Triple) -> usize {
        web.documents().filter(|d| d.triples().contains(t)).count()
    }

    #[test]
    fn rejects_invalid_base() {
        assert!(matches!(
            BaseDataset::from_ntriples("<http://b/a> <http://b/p> <http://elsewhere/x> ."),
            Err(BaseError::DanglingObject { .. })
        ));
        assert!(matches!(
            BaseDataset::from_ntriples("_:x <http://b/p> \"v\" ."),
            Err(BaseError::NonUriSubject(_))
        ));
        assert!(TestWebConfig::new(1.5, 0.0, 0).is_err());
    }

    #[test]
    fn degenerate_probabilities() {
        let b = base();
        let w100 = generate_testweb(&b, &TestWebConfig::new(1.0, 0.0, 3).unwrap(), LatencyModel::zero());
        let subj = generate_testweb(&b, &TestWebConfig::new(0.0, 1.0, 3).unwrap(), LatencyModel::zero());
        let obj = generate_testweb(&b, &TestWebConfig::new(0.0, 0.0, 3).unwrap(), LatencyModel::zero());
        for t in b.triples() {
            if t.o.is_literal() {
                for w in [&w100, &subj, &obj] {
                    assert_eq!(holders(w, t), 1);
                    assert!(w.get(&t.s).unwrap().triples().contains(t));
                }
                continue;
            }
            assert_eq!(holders(&w100, t), 2);
            assert_eq!(holders(&subj, t), 1);
            assert!(subj.get(&t.s).unwrap().triples().contains(t));
            assert_eq!(holders(&obj, t), 1);
            assert!(obj.get(&t.o).unwrap().triples().contains(t));
        }
        assert_eq!(w100.len(), 3);
        assert_eq!(w100.generator().unwrap().phi1, 1.0);
    }

    #[test]
    fn suite_shape() {
        let s = standard_config_suite();
        assert_eq!(s.len(), 14);
        assert_eq!((s[13].phi1, s[13].phi2), (0.62, 0.47));
        assert_eq!(s[12].phi1, 1.0);
        let labels: Vec<String> = s.iter().map(|c| c.label()).collect();
        assert_eq!(labels[0], "w0_0");
        assert_eq!(labels[5], "w33_33");
        assert_eq!(labels[12], "w100");
        assert_eq!(labels[13], "w62_47");
    }
}
