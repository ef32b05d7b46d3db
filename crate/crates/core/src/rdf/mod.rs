//! RDF terms, triples, triple patterns and solution mappings.
//!
//! Literals are opaque: a literal term carries its complete N-Triples
//! spelling (quotes, escapes, language tag or datatype) and two literals are
//! equal iff those spellings are equal.

mod eval;
mod ntriples;
mod query;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use eval::{evaluate_bgp, evaluate_bgp_with_provenance, ProvenancedSolution, SourcedTriple};
pub use ntriples::{parse_ntriples, scope_blank_nodes, serialize_ntriples};
pub use query::parse_query;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RdfError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("invalid URI {0:?}: must be non-empty and contain no whitespace")]
    InvalidUri(String),
    #[error("a literal cannot be the subject of a triple")]
    LiteralSubject,
    #[error("the predicate of a triple must be a URI")]
    NonUriPredicate,
    #[error("a query needs at least one triple pattern")]
    EmptyQuery,
}

/// An RDF term.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Uri(Arc<str>),
    /// Full N-Triples spelling, e.g. `"chat"@fr` or `"1"^^<http://...#int>`.
    Literal(Arc<str>),
    /// Label without the `_:` prefix.
    Blank(Arc<str>),
}

impl Term {
    /// URI term. The caller guarantees validity; see [`Term::parse_uri`].
    pub fn uri(s: impl AsRef<str>) -> Self {
        let s = s.as_ref();
        debug_assert!(valid_uri(s), "invalid URI {s:?}");
        Term::Uri(Arc::from(s))
    }

    pub fn parse_uri(s: &str) -> Result<Self, RdfError> {
        if valid_uri(s) {
            Ok(Term::Uri(Arc::from(s)))
        } else {
            Err(RdfError::InvalidUri(s.to_string()))
        }
    }

    /// Plain string literal; quotes and escapes are added.
    pub fn plain_literal(value: &str) -> Self {
        Term::Literal(Arc::from(ntriples::quote_literal(value).as_str()))
    }

    /// Literal from its full N-Triples spelling, taken verbatim.
    pub fn raw_literal(spelling: impl AsRef<str>) -> Self {
        Term::Literal(Arc::from(spelling.as_ref()))
    }

    pub fn blank(label: impl AsRef<str>) -> Self {
        Term::Blank(Arc::from(label.as_ref()))
    }

    pub fn is_uri(&self) -> bool {
        matches!(self, Term::Uri(_))
    }

    pub fn is_literal(&self) -> bool {
        matches!(self, Term::Literal(_))
    }

    pub fn is_blank(&self) -> bool {
        matches!(self, Term::Blank(_))
    }

    /// URI string, label, or literal spelling.
    pub fn lexical(&self) -> &str {
        match self {
            Term::Uri(s) | Term::Literal(s) | Term::Blank(s) => s,
        }
    }

    pub fn as_uri(&self) -> Option<&str> {
        match self {
            Term::Uri(s) => Some(s),
            _ => None,
        }
    }
}

pub(crate) fn valid_uri(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Uri(u) => write!(f, "<{u}>"),
            Term::Literal(l) => f.write_str(l),
            Term::Blank(b) => write!(f, "_:{b}"),
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub s: Term,
    pub p: Term,
    pub o: Term,
}

impl Triple {
    pub fn new(s: Term, p: Term, o: Term) -> Result<Self, RdfError> {
        if s.is_literal() {
            return Err(RdfError::LiteralSubject);
        }
        if !p.is_uri() {
            return Err(RdfError::NonUriPredicate);
        }
        Ok(Self { s, p, o })
    }

    pub fn terms(&self) -> [&Term; 3] {
        [&self.s, &self.p, &self.o]
    }

    /// URIs in subject, predicate and object position, in that order.
    pub fn uris(&self) -> impl Iterator<Item = &Term> {
        self.terms().into_iter().filter(|t| t.is_uri())
    }

    /// N-Triples line without the trailing newline.
    pub fn to_ntriples(&self) -> String {
        format!("{} {} {} .", self.s, self.p, self.o)
    }
}

impl fmt::Display for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.s, self.p, self.o)
    }
}

impl fmt::Debug for Triple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:?} {:?} {:?})", self.s, self.p, self.o)
    }
}

/// Query variable, stored without the leading `?`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(Arc<str>);

impl Var {
    pub fn new(name: impl AsRef<str>) -> Self {
        Var(Arc::from(name.as_ref()))
    }

    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "?{}", self.0)
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum PatternTerm {
    Var(Var),
    Term(Term),
}

impl PatternTerm {
    pub fn var(name: &str) -> Self {
        PatternTerm::Var(Var::new(name))
    }

    pub fn uri(u: &str) -> Self {
        PatternTerm::Term(Term::uri(u))
    }

    fn resolve<'a>(&'a self, mu: &'a SolutionMapping) -> Option<&'a Term> {
        match self {
            PatternTerm::Term(t) => Some(t),
            PatternTerm::Var(v) => mu.get(v),
        }
    }
}

impl From<Term> for PatternTerm {
    fn from(t: Term) -> Self {
        PatternTerm::Term(t)
    }
}

impl From<Var> for PatternTerm {
    fn from(v: Var) -> Self {
        PatternTerm::Var(v)
    }
}

impl fmt::Display for PatternTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PatternTerm::Var(v) => write!(f, "{v}"),
            PatternTerm::Term(t) => write!(f, "{t}"),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct TriplePattern {
    pub s: PatternTerm,
    pub p: PatternTerm,
    pub o: PatternTerm,
}

impl TriplePattern {
    pub fn new(
        s: impl Into<PatternTerm>,
        p: impl Into<PatternTerm>,
        o: impl Into<PatternTerm>,
    ) -> Self {
        Self {
            s: s.into(),
            p: p.into(),
            o: o.into(),
        }
    }

    pub fn positions(&self) -> [&PatternTerm; 3] {
        [&self.s, &self.p, &self.o]
    }

    /// Distinct variables in s, p, o order.
    pub fn vars(&self) -> Vec<Var> {
        let mut out: Vec<Var> = Vec::with_capacity(3);
        for pos in self.positions() {
            if let PatternTerm::Var(v) = pos {
                if !out.contains(v) {
                    out.push(v.clone());
                }
            }
        }
        out
    }

    pub fn is_ground(&self) -> bool {
        self.positions()
            .iter()
            .all(|p| matches!(p, PatternTerm::Term(_)))
    }

    /// Terms (not variables) in the pattern.
    pub fn constants(&self) -> impl Iterator<Item = &Term> {
        self.positions().into_iter().filter_map(|p| match p {
            PatternTerm::Term(t) => Some(t),
            PatternTerm::Var(_) => None,
        })
    }

    /// Binds the pattern's variables against `t`. `None` if a constant
    /// position differs or a repeated variable would take two values.
    pub fn match_triple(&self, t: &Triple) -> Option<SolutionMapping> {
        let mut mu = SolutionMapping::new();
        for (pos, term) in self.positions().into_iter().zip(t.terms()) {
            match pos {
                PatternTerm::Term(c) => {
                    if c != term {
                        return None;
                    }
                }
                PatternTerm::Var(v) => {
                    if mu.bind(v.clone(), term.clone()).is_err() {
                        return None;
                    }
                }
            }
        }
        Some(mu)
    }

    pub fn matches(&self, t: &Triple) -> bool {
        self.match_triple(t).is_some()
    }

    /// Replaces variables by their bindings. `None` if a variable is unbound
    /// or the result is not a valid triple.
    pub fn instantiate(&self, mu: &SolutionMapping) -> Option<Triple> {
        let s = self.s.resolve(mu)?.clone();
        let p = self.p.resolve(mu)?.clone();
        let o = self.o.resolve(mu)?.clone();
        Triple::new(s, p, o).ok()
    }
}

impl fmt::Display for TriplePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {} .", self.s, self.p, self.o)
    }
}

/// A set of variable bindings, kept sorted by variable.
#[derive(Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SolutionMapping {
    bindings: Vec<(Var, Term)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BindingConflict;

impl SolutionMapping {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (Var, Term)>>(pairs: I) -> Result<Self, BindingConflict> {
        let mut mu = Self::new();
        for (v, t) in pairs {
            mu.bind(v, t)?;
        }
        Ok(mu)
    }

    pub fn get(&self, v: &Var) -> Option<&Term> {
        self.bindings
            .binary_search_by(|(k, _)| k.cmp(v))
            .ok()
            .map(|i| &self.bindings[i].1)
    }

    pub fn contains(&self, v: &Var) -> bool {
        self.get(v).is_some()
    }

    /// Adds a binding; rebinding to the same term is a no-op.
    pub fn bind(&mut self, v: Var, t: Term) -> Result<(), BindingConflict> {
        match self.bindings.binary_search_by(|(k, _)| k.cmp(&v)) {
            Ok(i) if self.bindings[i].1 == t => Ok(()),
            Ok(_) => Err(BindingConflict),
            Err(i) => {
                self.bindings.insert(i, (v, t));
                Ok(())
            }
        }
    }

    pub fn len(&self) -> usize {
        self.bindings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bindings.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Term)> {
        self.bindings.iter().map(|(v, t)| (v, t))
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.bindings.iter().map(|(v, _)| v)
    }

    /// True iff both mappings agree on every shared variable.
    pub fn compatible(&self, other: &SolutionMapping) -> bool {
        let (mut i, mut j) = (0, 0);
        while i < self.bindings.len() && j < other.bindings.len() {
            let (a, b) = (&self.bindings[i], &other.bindings[j]);
            match a.0.cmp(&b.0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    if a.1 != b.1 {
                        return false;
                    }
                    i += 1;
                    j += 1;
                }
            }
        }
        true
    }

    /// Union of two compatible mappings; `None` if they disagree somewhere.
    pub fn merge_compatible(&self, other: &SolutionMapping) -> Option<SolutionMapping> {
        let mut out = Vec::with_capacity(self.bindings.len() + other.bindings.len());
        let (mut i, mut j) = (0, 0);
        while i < self.bindings.len() && j < other.bindings.len() {
            let (a, b) = (&self.bindings[i], &other.bindings[j]);
            match a.0.cmp(&b.0) {
                std::cmp::Ordering::Less => {
                    out.push(a.clone());
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b.clone());
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    if a.1 != b.1 {
                        return None;
                    }
                    out.push(a.clone());
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.bindings[i..]);
        out.extend_from_slice(&other.bindings[j..]);
        Some(SolutionMapping { bindings: out })
    }
}

impl fmt::Debug for SolutionMapping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map()
            .entries(self.bindings.iter().map(|(v, t)| (v, t)))
            .finish()
    }
}

/// A conjunctive query: triple patterns plus the seed URIs derived from them.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct BgpQuery {
    patterns: Vec<TriplePattern>,
    seeds: Vec<Term>,
}

impl BgpQuery {
    pub fn new(patterns: Vec<TriplePattern>) -> Result<Self, RdfError> {
        if patterns.is_empty() {
            return Err(RdfError::EmptyQuery);
        }
        let mut seeds: Vec<Term> = Vec::new();
        for tp in &patterns {
            for t in tp.constants() {
                if t.is_uri() && !seeds.contains(t) {
                    seeds.push(t.clone());
                }
            }
        }
        Ok(Self { patterns, seeds })
    }

    pub fn patterns(&self) -> &[TriplePattern] {
        &self.patterns
    }

    /// Every URI mentioned in any pattern, in order of first appearance.
    pub fn seeds(&self) -> &[Term] {
        &self.seeds
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Indices of all patterns that `t` matches.
    pub fn matching_patterns<'a>(&'a self, t: &'a Triple) -> impl Iterator<Item = usize> + 'a {
        self.patterns
            .iter()
            .enumerate()
            .filter(move |(_, tp)| tp.matches(t))
            .map(|(i, _)| i)
    }

    pub fn matches_any(&self, t: &Triple) -> bool {
        self.patterns.iter().any(|tp| tp.matches(t))
    }

    /// Distinct variables across all patterns.
    pub fn vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        for tp in &self.patterns {
            for v in tp.vars() {
                if !out.contains(&v) {
                    out.push(v);
                }
            }
        }
        out
    }
}

impl fmt::Display for BgpQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for tp in &self.patterns {
            writeln!(f, "{tp}")?;
        }
        Ok(())
    }
}
