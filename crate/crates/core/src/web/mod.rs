//! The queried Web: documents retrievable by URI lookup.
//!
//! [`WebOfLinkedData`] is the in-process store. Every lookup reports a delay
//! computed by the [`LatencyModel`]; the engine decides whether that delay is
//! spent on a virtual clock or slept for real. [`http`] exposes the same
//! store over HTTP and provides the matching client.

pub mod http;
mod manifest;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rdf::{ParseError, Term, Triple};

pub use manifest::{load_web, save_web, DocumentEntry, GeneratorInfo, Manifest, MANIFEST_FILE};

#[derive(Debug, Error)]
pub enum WebError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid manifest {path}: {message}")]
    Manifest { path: String, message: String },
    #[error("{path}: {source}")]
    Document {
        path: String,
        #[source]
        source: ParseError,
    },
    #[error("cannot start HTTP server on port {port}: {message}")]
    Bind { port: u16, message: String },
}

/// Why a lookup produced no document, other than the URI being unknown.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FetchError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected HTTP status {0}")]
    Status(u16),
    #[error("malformed response body: {0}")]
    Body(String),
}

/// A Web document: the URI whose lookup retrieves it and its triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    uri: Term,
    triples: BTreeSet<Triple>,
}

impl Document {
    pub fn new(uri: Term, triples: BTreeSet<Triple>) -> Self {
        debug_assert!(uri.is_uri());
        Self { uri, triples }
    }

    pub fn uri(&self) -> &Term {
        &self.uri
    }

    pub fn triples(&self) -> &BTreeSet<Triple> {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }
}

/// Deterministic per-URI lookup delay:
/// `base_ms + fnv1a(seed, uri) mod (jitter_ms + 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub base_ms: u64,
    pub jitter_ms: u64,
    pub seed: u64,
}

impl Default for LatencyModel {
    fn default() -> Self {
        Self {
            base_ms: 50,
            jitter_ms: 0,
            seed: 0,
        }
    }
}

impl LatencyModel {
    pub fn zero() -> Self {
        Self {
            base_ms: 0,
            jitter_ms: 0,
            seed: 0,
        }
    }

    pub fn delay_ms(&self, uri: &str) -> u64 {
        self.base_ms + stable_hash(self.seed, uri) % (self.jitter_ms + 1)
    }

    pub fn delay_us(&self, uri: &str) -> u64 {
        self.delay_ms(uri) * 1000
    }
}

/// 64-bit FNV-1a over the little-endian seed bytes followed by the URI bytes.
pub fn stable_hash(seed: u64, s: &str) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    seed.to_le_bytes()
        .iter()
        .chain(s.as_bytes())
        .fold(OFFSET, |h, b| (h ^ u64::from(*b)).wrapping_mul(PRIME))
}

/// Result of one URI lookup.
#[derive(Debug, Clone)]
pub struct Lookup {
    /// `Ok(None)` is a failed lookup (unknown URI); `Err` is a transport or
    /// protocol failure.
    pub outcome: Result<Option<Arc<Document>>, FetchError>,
    /// Time the lookup costs, in microseconds.
    pub delay_us: u64,
    /// `true` if the delay is simulated and has not elapsed yet; `false` if
    /// it was measured on a real round trip.
    pub simulated: bool,
}

impl Lookup {
    pub fn document(&self) -> Option<&Arc<Document>> {
        self.outcome.as_ref().ok().and_then(|d| d.as_ref())
    }
}

/// Anything the data-retrieval operator can look URIs up in.
pub trait WebAccess: Send + Sync {
    fn lookup(&self, uri: &Term) -> Lookup;
}

impl<T: WebAccess + ?Sized> WebAccess for &T {
    fn lookup(&self, uri: &Term) -> Lookup {
        (**self).lookup(uri)
    }
}

impl<T: WebAccess + ?Sized> WebAccess for Arc<T> {
    fn lookup(&self, uri: &Term) -> Lookup {
        (**self).lookup(uri)
    }
}

impl<T: WebAccess + ?Sized> WebAccess for Box<T> {
    fn lookup(&self, uri: &Term) -> Lookup {
        (**self).lookup(uri)
    }
}

/// In-memory Web of Linked Data. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct WebOfLinkedData {
    docs: BTreeMap<Term, Arc<Document>>,
    aliases: HashMap<Term, Term>,
    latency: LatencyModel,
    generator: Option<GeneratorInfo>,
}

impl WebOfLinkedData {
    pub fn new(latency: LatencyModel) -> Self {
        Self {
            latency,
            ..Self::default()
        }
    }

    pub fn from_documents<I: IntoIterator<Item = Document>>(docs: I, latency: LatencyModel) -> Self {
        let mut web = Self::new(latency);
        for d in docs {
            web.insert(d);
        }
        web
    }

    /// Adds or replaces the document for `doc.uri()`.
    pub fn insert(&mut self, doc: Document) {
        self.docs.insert(doc.uri.clone(), Arc::new(doc));
    }

    /// Makes `alias` resolve to the document of `target`.
    pub fn add_alias(&mut self, alias: Term, target: Term) {
        self.aliases.insert(alias, target);
    }

    pub fn aliases(&self) -> &HashMap<Term, Term> {
        &self.aliases
    }

    pub fn latency(&self) -> LatencyModel {
        self.latency
    }

    pub fn set_latency(&mut self, latency: LatencyModel) {
        self.latency = latency;
    }

    pub fn with_latency(mut self, latency: LatencyModel) -> Self {
        self.latency = latency;
        self
    }

    pub fn generator(&self) -> Option<&GeneratorInfo> {
        self.generator.as_ref()
    }

    pub fn set_generator(&mut self, info: Option<GeneratorInfo>) {
        self.generator = info;
    }

    /// Resolves a URI to its document, ignoring latency.
    pub fn get(&self, uri: &Term) -> Option<&Arc<Document>> {
        self.docs
            .get(uri)
            .or_else(|| self.aliases.get(uri).and_then(|t| self.docs.get(t)))
    }

    pub fn documents(&self) -> impl Iterator<Item = &Arc<Document>> {
        self.docs.values()
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Multiset union of all document triples, as (document, triple) pairs.
    pub fn total_triples(&self) -> usize {
        self.docs.values().map(|d| d.len()).sum()
    }
}

impl WebAccess for WebOfLinkedData {
    fn lookup(&self, uri: &Term) -> Lookup {
        let delay_us = uri
            .as_uri()
            .map(|u| self.latency.delay_us(u))
            .unwrap_or(self.latency.base_ms * 1000);
        Lookup {
            outcome: Ok(self.get(uri).cloned()),
            delay_us,
            simulated: true,
        }
    }
}

/// Wraps another access path and remembers every result, including failed
/// lookups. Repeated lookups cost nothing.
pub struct CachingAccess<A> {
    inner: A,
    cache: Mutex<HashMap<Term, Result<Option<Arc<Document>>, FetchError>>>,
    inner_lookups: AtomicU64,
}

impl<A: WebAccess> CachingAccess<A> {
    pub fn new(inner: A) -> Self {
        Self {
            inner,
            cache: Mutex::new(HashMap::new()),
            inner_lookups: AtomicU64::new(0),
        }
    }

    /// Number of lookups forwarded to the wrapped access path so far.
    pub fn inner_lookups(&self) -> u64 {
        self.inner_lookups.load(Ordering::SeqCst)
    }

    pub fn cached(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }

    /// Stores a result without going through the wrapped access path.
    pub fn prepopulate(&self, uri: Term, doc: Option<Arc<Document>>) {
        self.cache.lock().expect("cache lock").insert(uri, Ok(doc));
    }

    pub fn inner(&self) -> &A {
        &self.inner
    }
}

impl<A: WebAccess> WebAccess for CachingAccess<A> {
    fn lookup(&self, uri: &Term) -> Lookup {
        if let Some(hit) = self.cache.lock().expect("cache lock").get(uri) {
            return Lookup {
                outcome: hit.clone(),
                delay_us: 0,
                simulated: true,
            };
        }
        self.inner_lookups.fetch_add(1, Ordering::SeqCst);
        let fresh = self.inner.lookup(uri);
        self.cache
            .lock()
            .expect("cache lock")
            .insert(uri.clone(), fresh.outcome.clone());
        fresh
    }
}
