//! Text format for basic graph pattern queries.
//!
//! ```text
//! PREFIX ex: <http://example.org/>
//! ?s ex:knows ?o .
//! ?o <http://xmlns.com/foaf/0.1/name> "Alice"@en .
//! ```
//!
//! `PREFIX` declarations, then triple patterns separated by `.`. An optional
//! `SELECT * WHERE { ... }` wrapper is accepted and ignored, as are `#`
//! comments. `a` abbreviates `rdf:type`.

use std::collections::HashMap;
use std::sync::Arc;

use super::ntriples::Cursor;
use super::{BgpQuery, ParseError, PatternTerm, RdfError, Term, TriplePattern, Var};

const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Var(String),
    Term(Term),
    Dot,
    Open,
    Close,
    Star,
    Word(String),
}

pub fn parse_query(text: &str) -> Result<BgpQuery, RdfError> {
    let mut prefixes: HashMap<String, String> = HashMap::new();
    let mut tokens: Vec<(usize, Token)> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let mut cur = Cursor::new(raw, line_no);
        loop {
            cur.skip_ws();
            match cur.peek() {
                None | Some('#') => break,
                Some(_) => {}
            }
            let tok = next_token(&mut cur, &prefixes)?;
            if let Token::Word(w) = &tok {
                if w.eq_ignore_ascii_case("PREFIX") {
                    let (name, iri) = prefix_decl(&mut cur)?;
                    prefixes.insert(name, iri);
                    continue;
                }
            }
            tokens.push((line_no, tok));
        }
    }

    let body = strip_select_wrapper(tokens)?;
    let mut patterns = Vec::new();
    let mut current: Vec<(usize, PatternTerm)> = Vec::new();
    let mut last_line = 1;
    for (line, tok) in body {
        last_line = line;
        match tok {
            Token::Dot => {
                if current.is_empty() {
                    continue;
                }
                patterns.push(build_pattern(std::mem::take(&mut current), line)?);
            }
            Token::Var(v) => current.push((line, PatternTerm::Var(Var::new(v)))),
            Token::Term(t) => current.push((line, PatternTerm::Term(t))),
            other => {
                return Err(ParseError::new(line, format!("unexpected token {other:?}")).into())
            }
        }
        if current.len() > 3 {
            return Err(ParseError::new(line, "missing '.' between triple patterns").into());
        }
    }
    if !current.is_empty() {
        let line = current.last().map(|(l, _)| *l).unwrap_or(last_line);
        patterns.push(build_pattern(current, line)?);
    }
    BgpQuery::new(patterns)
}

fn build_pattern(parts: Vec<(usize, PatternTerm)>, line: usize) -> Result<TriplePattern, RdfError> {
    if parts.len() != 3 {
        return Err(ParseError::new(
            line,
            format!("a triple pattern needs 3 terms, found {}", parts.len()),
        )
        .into());
    }
    let mut it = parts.into_iter().map(|(_, p)| p);
    let (s, p, o) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
    if let PatternTerm::Term(t) = &s {
        if t.is_literal() {
            return Err(ParseError::new(line, "literal in subject position").into());
        }
    }
    if let PatternTerm::Term(t) = &p {
        if !t.is_uri() {
            return Err(ParseError::new(line, "predicate must be a URI or a variable").into());
        }
    }
    Ok(TriplePattern::new(s, p, o))
}

fn strip_select_wrapper(tokens: Vec<(usize, Token)>) -> Result<Vec<(usize, Token)>, RdfError> {
    let starts_with_select = matches!(
        tokens.first(),
        Some((_, Token::Word(w))) if w.eq_ignore_ascii_case("SELECT")
    );
    if !starts_with_select {
        if let Some((line, tok)) = tokens
            .iter()
            .find(|(_, t)| matches!(t, Token::Word(_) | Token::Open | Token::Close | Token::Star))
        {
            return Err(ParseError::new(*line, format!("unexpected token {tok:?}")).into());
        }
        return Ok(tokens);
    }
    let open = tokens
        .iter()
        .position(|(_, t)| *t == Token::Open)
        .ok_or_else(|| ParseError::new(tokens[0].0, "SELECT without '{'"))?;
    for (line, tok) in &tokens[1..open] {
        match tok {
            Token::Star | Token::Var(_) => {}
            Token::Word(w) if w.eq_ignore_ascii_case("WHERE") => {}
            other => {
                return Err(ParseError::new(*line, format!("unexpected token {other:?}")).into())
            }
        }
    }
    let mut rest: Vec<(usize, Token)> = tokens.into_iter().skip(open + 1).collect();
    match rest.pop() {
        Some((_, Token::Close)) => {}
        Some((line, _)) => return Err(ParseError::new(line, "expected closing '}'").into()),
        None => return Err(ParseError::new(1, "expected closing '}'").into()),
    }
    Ok(rest)
}

fn prefix_decl(cur: &mut Cursor<'_>) -> Result<(String, String), ParseError> {
    cur.skip_ws();
    let mut name = String::new();
    while let Some(c) = cur.peek() {
        if c == ':' {
            break;
        }
        if !(c.is_alphanumeric() || c == '_' || c == '-' || c == '.') {
            return Err(cur.error(format!("invalid character {c:?} in prefix name")));
        }
        name.push(c);
        cur.bump();
    }
    if !cur.eat(':') {
        return Err(cur.error("expected ':' in PREFIX declaration"));
    }
    cur.skip_ws();
    let iri = cur.iri()?;
    Ok((name, iri))
}

fn next_token(cur: &mut Cursor<'_>, prefixes: &HashMap<String, String>) -> Result<Token, ParseError> {
    let c = cur.peek().expect("caller checked for end of line");
    match c {
        '?' | '$' => {
            cur.bump();
            let name = take_name(cur);
            if name.is_empty() {
                return Err(cur.error("empty variable name"));
            }
            Ok(Token::Var(name))
        }
        '<' => Ok(Token::Term(Term::Uri(Arc::from(cur.iri()?.as_str())))),
        '"' => {
            let lit = cur.literal_with(|c| {
                let word = take_word(c);
                expand_pname(c, &word, prefixes).map(|t| t.lexical().to_string())
            })?;
            Ok(Token::Term(Term::Literal(Arc::from(lit.as_str()))))
        }
        '.' => {
            cur.bump();
            Ok(Token::Dot)
        }
        '{' => {
            cur.bump();
            Ok(Token::Open)
        }
        '}' => {
            cur.bump();
            Ok(Token::Close)
        }
        '*' => {
            cur.bump();
            Ok(Token::Star)
        }
        '_' if cur.rest().starts_with("_:") => {
            Err(cur.error("blank nodes are not supported in query patterns"))
        }
        _ => {
            let word = take_word(cur);
            if word.is_empty() {
                return Err(cur.error(format!("unexpected character {c:?}")));
            }
            if word == "a" {
                return Ok(Token::Term(Term::uri(RDF_TYPE)));
            }
            if word.contains(':') {
                return expand_pname(cur, &word, prefixes).map(Token::Term);
            }
            Ok(Token::Word(word))
        }
    }
}

fn take_name(cur: &mut Cursor<'_>) -> String {
    let mut s = String::new();
    while let Some(c) = cur.peek() {
        if c.is_alphanumeric() || c == '_' {
            s.push(c);
            cur.bump();
        } else {
            break;
        }
    }
    s
}

/// A keyword or prefixed name. A trailing '.' is left for the statement.
fn take_word(cur: &mut Cursor<'_>) -> String {
    let rest = cur.rest();
    let mut end = 0;
    for (i, c) in rest.char_indices() {
        if c.is_whitespace() || matches!(c, '{' | '}' | '<' | '"' | '#' | '?' | '$') {
            break;
        }
        end = i + c.len_utf8();
    }
    let mut word = &rest[..end];
    while word.ends_with('.') {
        word = &word[..word.len() - 1];
    }
    let word = word.to_string();
    for _ in word.chars() {
        cur.bump();
    }
    word
}

fn expand_pname(
    cur: &Cursor<'_>,
    word: &str,
    prefixes: &HashMap<String, String>,
) -> Result<Term, ParseError> {
    let (prefix, local) = word
        .split_once(':')
        .ok_or_else(|| cur.error(format!("expected a prefixed name, found {word:?}")))?;
    let base = prefixes
        .get(prefix)
        .ok_or_else(|| cur.error(format!("unknown prefix {prefix:?}")))?;
    Ok(Term::uri(format!("{base}{local}")))
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE_ONE: &str = "\
PREFIX nyt: <http://data.nytimes.com/elements/>
PREFIX owl: <http://www.w3.org/2002/07/owl#>
PREFIX dct: <http://purl.org/dc/terms/>
SELECT * WHERE {
  ?person nyt:latest_use ?mentionInNYT .
  ?person owl:sameAs ?chancellor .
  ?chancellor dct:subject <http://dbpedia.org/resource/Category:Chancellors_of_Germany>
}
";

    #[test]
    fn chancellor_query() {
        let q = parse_query(EXAMPLE_ONE).unwrap();
        assert_eq!(q.len(), 3);
        let cat = Term::uri("http://dbpedia.org/resource/Category:Chancellors_of_Germany");
        assert!(q.seeds().contains(&cat));
        assert!(q
            .seeds()
            .contains(&Term::uri("http://www.w3.org/2002/07/owl#sameAs")));
        assert_eq!(q.seeds().len(), 4);
        assert_eq!(q.patterns()[1].o, PatternTerm::var("chancellor"));
    }

    #[test]
    fn ground_pattern() {
        let q = parse_query("<http://a> <http://p> <http://b>").unwrap();
        assert_eq!(q.len(), 1);
        assert_eq!(
            q.seeds(),
            &[Term::uri("http://a"), Term::uri("http://p"), Term::uri("http://b")]
        );
    }

    #[test]
    fn all_variable_pattern_has_no_seeds() {
        let q = parse_query("?s ?p ?o .").unwrap();
        assert!(q.seeds().is_empty());
    }

    #[test]
    fn literals_and_rdf_type() {
        let q = parse_query(
            "PREFIX xsd: <http://www.w3.org/2001/XMLSchema#>\n?x a <http://C> .\n?x <http://v> \"4\"^^xsd:int .\n?x <http://l> \"hi\"@en",
        )
        .unwrap();
        assert_eq!(q.len(), 3);
        assert_eq!(q.patterns()[0].p, PatternTerm::uri(RDF_TYPE));
        assert_eq!(
            q.patterns()[1].o,
            PatternTerm::Term(Term::raw_literal(
                "\"4\"^^<http://www.w3.org/2001/XMLSchema#int>"
            ))
        );
        assert_eq!(q.patterns()[2].o, PatternTerm::Term(Term::raw_literal("\"hi\"@en")));
    }

    #[test]
    fn errors_have_line_numbers() {
        let err = parse_query("?x <http://p> ?y .\n?x foo:bar ?z .").unwrap_err();
        match err {
            RdfError::Parse(e) => {
                assert_eq!(e.line, 2);
                assert!(e.message.contains("unknown prefix"));
            }
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_query("?x <http://p> .").unwrap_err();
        assert!(matches!(err, RdfError::Parse(ParseError { line: 1, .. })));
        let err = parse_query("?x <http://p> ?y ?z .").unwrap_err();
        assert!(matches!(err, RdfError::Parse(ParseError { line: 1, .. })));
        assert!(matches!(parse_query("# nothing\n"), Err(RdfError::EmptyQuery)));
        assert!(parse_query("\"lit\" <http://p> ?y").is_err());
    }
}
