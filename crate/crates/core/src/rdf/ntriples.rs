//! Line-oriented N-Triples reader and writer.
//!
//! Supported subset: IRIs in angle brackets, `_:` blank nodes, quoted
//! literals with `\`-escapes and an optional `@lang` or `^^<datatype>`
//! suffix. `\uXXXX` escapes are passed through untouched. Comments start
//! with `#`.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::{valid_uri, ParseError, Term, Triple};

pub fn parse_ntriples(text: &str) -> Result<BTreeSet<Triple>, ParseError> {
    let mut out = BTreeSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut cur = Cursor::new(raw, line_no);
        cur.skip_ws();
        if cur.at_end() || cur.peek() == Some('#') {
            continue;
        }
        let s = cur.term()?;
        cur.skip_ws();
        let p = cur.term()?;
        cur.skip_ws();
        let o = cur.term()?;
        cur.skip_ws();
        if !cur.eat('.') {
            return Err(cur.error("expected '.' at end of statement"));
        }
        cur.skip_ws();
        if !cur.at_end() && cur.peek() != Some('#') {
            return Err(cur.error("trailing characters after '.'"));
        }
        let triple = Triple::new(s, p, o).map_err(|e| ParseError::new(line_no, e.to_string()))?;
        out.insert(triple);
    }
    Ok(out)
}

/// One line per triple, each ending in `" .\n"`, sorted by line text.
pub fn serialize_ntriples<'a, I>(triples: I) -> String
where
    I: IntoIterator<Item = &'a Triple>,
{
    let mut lines: Vec<String> = triples.into_iter().map(Triple::to_ntriples).collect();
    lines.sort();
    lines.dedup();
    let mut out = String::with_capacity(lines.iter().map(|l| l.len() + 1).sum());
    for l in lines {
        out.push_str(&l);
        out.push('\n');
    }
    out
}

/// Rewrites blank node labels to `<scope>_<label>` so that labels from
/// different documents never collide. Labels already carrying the prefix
/// are left alone, which keeps the rewrite idempotent.
pub fn scope_blank_nodes(triples: BTreeSet<Triple>, scope: &str) -> BTreeSet<Triple> {
    if !triples.iter().any(|t| t.s.is_blank() || t.o.is_blank()) {
        return triples;
    }
    let prefix = format!("{scope}_");
    let rewrite = |t: Term| match t {
        Term::Blank(l) if !l.starts_with(&prefix) => {
            Term::Blank(Arc::from(format!("{prefix}{l}").as_str()))
        }
        other => other,
    };
    triples
        .into_iter()
        .map(|t| Triple {
            s: rewrite(t.s),
            p: t.p,
            o: rewrite(t.o),
        })
        .collect()
}

pub(crate) fn quote_literal(value: &str) -> String {
    let mut out = String::with_capacity(value.len() + 2);
    out.push('"');
    for c in value.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

/// Character cursor over a single line, shared with the query parser.
pub(crate) struct Cursor<'a> {
    src: &'a str,
    pos: usize,
    pub(crate) line: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(src: &'a str, line: usize) -> Self {
        Self { src, pos: 0, line }
    }

    pub(crate) fn error(&self, msg: impl Into<String>) -> ParseError {
        ParseError::new(self.line, msg)
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.src.len()
    }

    pub(crate) fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    pub(crate) fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    pub(crate) fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    pub(crate) fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    pub(crate) fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(c) if c.is_whitespace()) {
            self.bump();
        }
    }

    /// Reads `<...>` and returns the IRI text.
    pub(crate) fn iri(&mut self) -> Result<String, ParseError> {
        if !self.eat('<') {
            return Err(self.error("expected '<'"));
        }
        let start = self.pos;
        loop {
            match self.bump() {
                None => return Err(self.error("unterminated IRI")),
                Some('>') => break,
                Some(c) if c.is_whitespace() || c == '<' || c == '"' => {
                    return Err(self.error(format!("invalid character {c:?} in IRI")))
                }
                Some(_) => {}
            }
        }
        let iri = &self.src[start..self.pos - 1];
        if !valid_uri(iri) {
            return Err(self.error("empty IRI"));
        }
        Ok(iri.to_string())
    }

    pub(crate) fn blank_label(&mut self) -> Result<String, ParseError> {
        if !self.rest().starts_with("_:") {
            return Err(self.error("expected '_:'"));
        }
        self.pos += 2;
        let start = self.pos;
        while matches!(self.peek(), Some(c) if c.is_alphanumeric() || c == '_' || c == '-' || c == '.')
        {
            self.bump();
        }
        // A trailing '.' terminates the statement rather than the label.
        while self.src[start..self.pos].ends_with('.') {
            self.pos -= 1;
        }
        if self.pos == start {
            return Err(self.error("empty blank node label"));
        }
        Ok(self.src[start..self.pos].to_string())
    }

    /// Reads a quoted literal with its suffix and returns the full spelling.
    /// `datatype` resolves a non-IRI datatype token (query prefixed names).
    pub(crate) fn literal_with(
        &mut self,
        mut datatype: impl FnMut(&mut Self) -> Result<String, ParseError>,
    ) -> Result<String, ParseError> {
        let start = self.pos;
        if !self.eat('"') {
            return Err(self.error("expected '\"'"));
        }
        loop {
            match self.bump() {
                None => return Err(self.error("unterminated literal")),
                Some('\\') => match self.bump() {
                    Some('t' | 'b' | 'n' | 'r' | 'f' | '"' | '\'' | '\\') => {}
                    Some('u') => self.hex_digits(4)?,
                    Some('U') => self.hex_digits(8)?,
                    _ => return Err(self.error("invalid escape sequence in literal")),
                },
                Some('"') => break,
                Some(_) => {}
            }
        }
        let mut spelling = self.src[start..self.pos].to_string();
        if self.eat('@') {
            let tag_start = self.pos;
            while matches!(self.peek(), Some(c) if c.is_ascii_alphanumeric() || c == '-') {
                self.bump();
            }
            if self.pos == tag_start {
                return Err(self.error("empty language tag"));
            }
            spelling.push('@');
            spelling.push_str(&self.src[tag_start..self.pos]);
        } else if self.rest().starts_with("^^") {
            self.pos += 2;
            let dt = if self.peek() == Some('<') {
                self.iri()?
            } else {
                datatype(self)?
            };
            spelling.push_str("^^<");
            spelling.push_str(&dt);
            spelling.push('>');
        }
        Ok(spelling)
    }

    fn hex_digits(&mut self, n: usize) -> Result<(), ParseError> {
        for _ in 0..n {
            match self.bump() {
                Some(c) if c.is_ascii_hexdigit() => {}
                _ => return Err(self.error("invalid unicode escape")),
            }
        }
        Ok(())
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some('<') => Ok(Term::Uri(Arc::from(self.iri()?.as_str()))),
            Some('_') => Ok(Term::Blank(Arc::from(self.blank_label()?.as_str()))),
            Some('"') => {
                let lit = self.literal_with(|c| Err(c.error("datatype must be an IRI")))?;
                Ok(Term::Literal(Arc::from(lit.as_str())))
            }
            Some(c) => Err(self.error(format!("unexpected character {c:?}"))),
            None => Err(self.error("unexpected end of line")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_line() {
        let set = parse_ntriples("<http://a> <http://p> <http://b> .").unwrap();
        assert_eq!(set.len(), 1);
        let t = set.into_iter().next().unwrap();
        assert_eq!(t.s, Term::uri("http://a"));
        assert_eq!(t.o, Term::uri("http://b"));
    }

    #[test]
    fn empty_input_and_comments() {
        assert!(parse_ntriples("").unwrap().is_empty());
        assert!(parse_ntriples("# only a comment\n\n   \n").unwrap().is_empty());
    }

    #[test]
    fn duplicate_lines_collapse() {
        let line = "<http://a> <http://p> \"x\"@en .\n";
        let set = parse_ntriples(&format!("{line}{line}")).unwrap();
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn literal_forms() {
        let text = r#"<http://a> <http://p> "say \"hi\"é" .
<http://a> <http://p> "5"^^<http://www.w3.org/2001/XMLSchema#int> .
_:b1 <http://p> "chat"@fr . # trailing comment
"#;
        let set = parse_ntriples(text).unwrap();
        assert_eq!(set.len(), 3);
        assert!(set.iter().any(|t| t.o.lexical() == r#""say \"hi\"é""#));
        assert!(set.iter().any(|t| t.s == Term::blank("b1")));
        assert_eq!(parse_ntriples(&serialize_ntriples(&set)).unwrap(), set);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = "<http://a> <http://p> <http://b> .\n<http://a> <http://p> <http://b>\n";
        assert_eq!(parse_ntriples(text).unwrap_err().line, 2);
        let text = "\n\n\"lit\" <http://p> <http://b> .";
        assert_eq!(parse_ntriples(text).unwrap_err().line, 3);
        assert!(parse_ntriples("<http://a> _:x <http://b> .").is_err());
        assert!(parse_ntriples("<http://a> <http://p> \"open .").is_err());
        assert!(parse_ntriples("<http://a> <http://p> <http://b> . junk").is_err());
    }

    #[test]
    fn serialize_shapes() {
        assert_eq!(serialize_ntriples(&BTreeSet::new()), "");
        let set = parse_ntriples("<http://a> <http://p> <http://b> .").unwrap();
        let out = serialize_ntriples(&set);
        assert_eq!(out, "<http://a> <http://p> <http://b> .\n");
    }

    #[test]
    fn blank_scoping_is_idempotent() {
        let set = parse_ntriples("_:x <http://p> _:y .\n<http://a> <http://p> \"_:z\" .").unwrap();
        let once = scope_blank_nodes(set, "doc3");
        assert!(once.iter().any(|t| t.s == Term::blank("doc3_x") && t.o == Term::blank("doc3_y")));
        assert!(once.iter().any(|t| t.o.lexical() == "\"_:z\""));
        let twice = scope_blank_nodes(once.clone(), "doc3");
        assert_eq!(once, twice);
    }

    fn arb_term(subject: bool) -> impl Strategy<Value = Term> {
        let uri = "[a-z]{1,6}".prop_map(|s| Term::uri(format!("http://ex.org/{s}")));
        let blank = "[a-z][a-z0-9]{0,4}".prop_map(Term::blank);
        let lit = "[ -~\n\t]{0,8}".prop_map(|s| Term::plain_literal(&s));
        if subject {
            prop_oneof![uri, blank].boxed()
        } else {
            prop_oneof![uri, blank, lit].boxed()
        }
    }

    proptest! {
        #[test]
        fn round_trip(triples in proptest::collection::btree_set(
            (arb_term(true), "[a-z]{1,4}", arb_term(false)).prop_map(|(s, p, o)| {
                Triple::new(s, Term::uri(format!("http://ex.org/p/{p}")), o).unwrap()
            }), 0..12)
        ) {
            let text = serialize_ntriples(&triples);
            prop_assert_eq!(parse_ntriples(&text).unwrap(), triples);
        }
    }
}
