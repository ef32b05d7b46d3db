//! On-disk layout of a Web: `manifest.json` plus one N-Triples file per
//! document under `docs/`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Document, LatencyModel, WebError, WebOfLinkedData};
use crate::rdf::{parse_ntriples, scope_blank_nodes, serialize_ntriples, Term};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentEntry {
    pub uri: String,
    pub path: String,
}

/// Parameters a generated Web was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub phi1: f64,
    pub phi2: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub documents: Vec<DocumentEntry>,
    pub latency: LatencyModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorInfo>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub aliases: BTreeMap<String, String>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> WebError + '_ {
    move |source| WebError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `web` into `dir`, creating it if needed. Output is a pure
/// function of the Web's contents.
pub fn save_web(web: &WebOfLinkedData, dir: &Path) -> Result<Manifest, WebError> {
    let docs_dir = dir.join("docs");
    fs::create_dir_all(&docs_dir).map_err(io_err(&docs_dir))?;
    let mut documents = Vec::with_capacity(web.len());
    for (i, doc) in web.documents().enumerate() {
        let rel = format!("docs/{i:05}.nt");
        let path = dir.join(&rel);
        fs::write(&path, serialize_ntriples(doc.triples())).map_err(io_err(&path))?;
        documents.push(DocumentEntry {
            uri: doc.uri().lexical().to_string(),
            path: rel,
        });
    }
    let manifest = Manifest {
        documents,
        latency: web.latency(),
        generator: web.generator().copied(),
        aliases: web
            .aliases()
            .iter()
            .map(|(a, t)| (a.lexical().to_string(), t.lexical().to_string()))
            .collect(),
    };
    let path = dir.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Reads a Web written by [`save_web`]. `dir` may also point at the manifest
/// file itself.
pub fn load_web(dir: &Path) -> Result<WebOfLinkedData, WebError> {
    let (dir, manifest_path) = if dir.is_file() {
        (dir.parent().unwrap_or(Path::new(".")), dir.to_path_buf())
    } else {
        (dir, dir.join(MANIFEST_FILE))
    };
    let text = fs::read_to_string(&manifest_path).map_err(io_err(&manifest_path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| WebError::Manifest {
        path: manifest_path.display().to_string(),
        message: e.to_string(),
    })?;
    let bad = |message: String| WebError::Manifest {
        path: manifest_path.display().to_string(),
        message,
    };

    let mut web = WebOfLinkedData::new(manifest.latency);
    web.set_generator(manifest.generator);
    for (i, entry) in manifest.documents.iter().enumerate() {
        let uri = Term::parse_uri(&entry.uri).map_err(|e| bad(e.to_string()))?;
        if web.get(&uri).is_some() {
            return Err(bad(format!("duplicate document URI {}", entry.uri)));
        }
        let path = dir.join(&entry.path);
        let body = fs::read_to_string(&path).map_err(io_err(&path))?;
        let triples = parse_ntriples(&body).map_err(|source| WebError::Document {
            path: path.display().to_string(),
            source,
        })?;
        web.insert(Document::new(uri, scope_blank_nodes(triples, &format!("doc{i}"))));
    }
    for (alias, target) in &manifest.aliases {
        let a = Term::parse_uri(alias).map_err(|e| bad(e.to_string()))?;
        let t = Term::parse_uri(target).map_err(|e| bad(e.to_string()))?;
        web.add_alias(a, t);
    }
    Ok(web)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn sample() -> WebOfLinkedData {
        let a = Term::uri("http://ex.org/a");
        let doc = Document::new(
            a.clone(),
            parse_ntriples(
                "<http://ex.org/a> <http://ex.org/p> \"x\" .\n<http://ex.org/a> <http://ex.org/q> <http://ex.org/b> .",
            )
            .unwrap(),
        );
        let empty = Document::new(Term::uri("http://ex.org/b"), BTreeSet::new());
        let mut web = WebOfLinkedData::from_documents(
            [doc, empty],
            LatencyModel {
                base_ms: 5,
                jitter_ms: 3,
                seed: 11,
            },
        );
        web.set_generator(Some(GeneratorInfo {
            phi1: 0.5,
            phi2: 0.25,
            seed: 1,
        }));
        web
    }

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let web = sample();
        save_web(&web, dir.path()).unwrap();
        let back = load_web(dir.path()).unwrap();
        assert_eq!(back.len(), 2);
        assert_eq!(back.latency(), web.latency());
        assert_eq!(back.generator(), web.generator());
        for d in web.documents() {
            assert_eq!(back.get(d.uri()).unwrap().as_ref(), d.as_ref());
        }
        let via_file = load_web(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(via_file.len(), 2);
    }

    #[test]
    fn saving_twice_is_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        save_web(&sample(), a.path()).unwrap();
        save_web(&sample(), b.path()).unwrap();
        for f in ["manifest.json", "docs/00000.nt", "docs/00001.nt"] {
            assert_eq!(
                fs::read(a.path().join(f)).unwrap(),
                fs::read(b.path().join(f)).unwrap()
            );
        }
    }

    #[test]
    fn rejects_bad_manifest() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(MANIFEST_FILE), "{\"documents\": 3}").unwrap();
        assert!(matches!(load_web(dir.path()), Err(WebError::Manifest { .. })));
        let missing = dir.path().join("nope");
        assert!(matches!(load_web(&missing), Err(WebError::Io { .. })));
    }
}
