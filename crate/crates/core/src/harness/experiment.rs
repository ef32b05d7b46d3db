//! Sequential sweeps over webs × queries × strategies × routing policies.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{dryrun::rcc_dry_run, response_times, Metric};
use crate::engine::{execute, EngineConfig, RoutingPolicy, Semantics};
use crate::num::{geometric_mean, sample_stdev};
use crate::priority::StrategyKind;
use crate::rdf::{parse_query, BgpQuery, RdfError};
use crate::testweb::{generate_testweb, standard_config_suite, BaseDataset, BaseError, TestWebConfig};
use crate::web::{load_web, LatencyModel, WebError, WebOfLinkedData};

pub const RESULTS_CSV_HEADER: &str = "web,query,strategy,policy,metric,gmean,stdev,n";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid experiment spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Web(#[from] WebError),
    #[error("{path}: {source}")]
    Query {
        path: String,
        #[source]
        source: RdfError,
    },
    #[error("{path}: {source}")]
    Base {
        path: String,
        #[source]
        source: BaseError,
    },
    #[error("malformed results CSV: {0}")]
    Csv(String),
}

/// A saved Web directory, or test Webs generated from a base dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WebSource {
    Generated {
        #[serde(default)]
        name: Option<String>,
        base: PathBuf,
        /// `(phi1, phi2)` pairs; the standard fourteen when absent.
        #[serde(default)]
        configs: Option<Vec<(f64, f64)>>,
        #[serde(default)]
        seed: u64,
        #[serde(default)]
        latency: Option<LatencyModel>,
    },
    Dir {
        #[serde(default)]
        name: Option<String>,
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuerySource {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub text: Option<String>,
}

fn default_strategies() -> Vec<StrategyKind> {
    vec![StrategyKind::Baseline]
}

fn default_policies() -> Vec<RoutingPolicy> {
    vec![RoutingPolicy::Lr]
}

fn default_repetitions() -> usize {
    5
}

fn default_threads() -> usize {
    1
}

fn default_true() -> bool {
    true
}

/// Run `i` of a cell uses engine seed `seed_base + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub webs: Vec<WebSource>,
    pub queries: Vec<QuerySource>,
    #[serde(default = "default_strategies")]
    pub strategies: Vec<StrategyKind>,
    #[serde(default = "default_policies")]
    pub policies: Vec<RoutingPolicy>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default = "default_threads")]
    pub lookup_threads: usize,
    #[serde(default = "default_true")]
    pub deterministic: bool,
    #[serde(default)]
    pub semantics: Semantics,
    /// Directory relative paths are resolved against; the spec file's
    /// directory when loaded from a file.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentSpec {
    /// Parses JSON, or YAML when the text is not JSON.
    pub fn parse(text: &str) -> Result<Self, ExperimentError> {
        let spec: Self = match serde_json::from_str(text) {
            Ok(s) => s,
            Err(json_err) => serde_yaml::from_str(text)
                .map_err(|yaml_err| ExperimentError::Spec(format!("not JSON ({json_err}) nor YAML ({yaml_err})")))?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = read(path)?;
        let mut spec = Self::parse(&text)?;
        spec.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::Spec(m.to_string()));
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        if self.lookup_threads == 0 {
            return bad("lookup_threads must be at least 1");
        }
        if self.webs.is_empty() || self.queries.is_empty() {
            return bad("at least one web and one query are required");
        }
        if self.strategies.is_empty() || self.policies.is_empty() {
            return bad("at least one strategy and one policy are required");
        }
        for q in &self.queries {
            if q.path.is_some() == q.text.is_some() {
                return bad("each query needs exactly one of `path` and `text`");
            }
        }
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn load_webs(&self) -> Result<Vec<(String, WebOfLinkedData)>, ExperimentError> {
        let mut out = Vec::new();
        for src in &self.webs {
            match src {
                WebSource::Dir { name, path } => {
                    let path = self.resolve(path);
                    let name = name.clone().unwrap_or_else(|| stem(&path));
                    out.push((name, load_web(&path)?));
                }
                WebSource::Generated {
                    name,
                    base,
                    configs,
                    seed,
                    latency,
                } => {
                    let path = self.resolve(base);
                    let base = BaseDataset::from_ntriples(&read(&path)?).map_err(|source| ExperimentError::Base {
                        path: path.display().to_string(),
                        source,
                    })?;
                    let configs = match configs {
                        None => standard_config_suite(),
                        Some(pairs) => pairs
                            .iter()
                            .map(|(p1, p2)| TestWebConfig::new(*p1, *p2, 0))
                            .collect::<Result<_, _>>()
                            .map_err(|e| ExperimentError::Spec(e.to_string()))?,
                    };
                    let prefix = name.clone().unwrap_or_else(|| stem(&path));
                    for cfg in configs {
                        let cfg = cfg.with_seed(*seed);
                        let web = generate_testweb(&base, &cfg, latency.unwrap_or_default());
                        out.push((format!("{prefix}/{}", cfg.label()), web));
                    }
                }
            }
        }
        Ok(out)
    }

    fn load_queries(&self) -> Result<Vec<(String, BgpQuery)>, ExperimentError> {
        self.queries
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let (text, origin) = match (&q.path, &q.text) {
                    (Some(p), _) => {
                        let p = self.resolve(p);
                        (read(&p)?, p.display().to_string())
                    }
                    (None, Some(t)) => (t.clone(), format!("query #{}", i + 1)),
                    (None, None) => unreachable!("validated"),
                };
                let name = q
                    .name
                    .clone()
                    .or_else(|| q.path.as_deref().map(stem))
                    .unwrap_or_else(|| format!("q{}", i + 1));
                let query = parse_query(&text).map_err(|source| ExperimentError::Query { path: origin, source })?;
                Ok((name, query))
            })
            .collect()
    }
}

fn read(path: &Path) -> Result<String, ExperimentError> {
    std::fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .or_else(|| p.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

/// Aggregate of one metric over the repetitions of one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub web: String,
    pub query: String,
    pub strategy: String,
    pub policy: String,
    pub metric: Metric,
    /// Absent when no repetition produced a value.
    pub gmean: Option<f64>,
    pub stdev: Option<f64>,
    /// Repetitions that produced a value.
    pub n: usize,
    /// Why repetitions failed, if any did.
    pub error: Option<String>,
}

/// Runs every cell of the sweep, one execution at a time. Failures of
/// individual executions end up in [`CellResult::error`]; only unreadable
/// inputs abort the sweep.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<CellResult>, ExperimentError> {
    spec.validate()?;
    let webs = spec.load_webs()?;
    let queries = spec.load_queries()?;
    let mut rows = Vec::new();
    for (web_name, web) in &webs {
        for (query_name, query) in &queries {
            let oracle = if spec.strategies.contains(&StrategyKind::Oracle) {
                Some(
                    rcc_dry_run(web, query)
                        .map(|m| Arc::new(m.into_iter().collect()))
                        .map_err(|e| e.to_string()),
                )
            } else {
                None
            };
            for &strategy in &spec.strategies {
                for policy in &spec.policies {
                    log::info!("running {web_name} {query_name} {} {policy}", strategy.name());
                    let mut values: Vec<Vec<f64>> = vec![Vec::new(); Metric::ALL.len()];
                    let mut errors = Vec::new();
                    for rep in 0..spec.repetitions {
                        let oracle_rcc = match (&oracle, strategy) {
                            (Some(Ok(m)), StrategyKind::Oracle) => Some(Arc::clone(m)),
                            (Some(Err(e)), StrategyKind::Oracle) => {
                                errors.push(format!("oracle dry run failed: {e}"));
                                continue;
                            }
                            _ => None,
                        };
                        let cfg = EngineConfig {
                            strategy,
                            routing: policy.clone(),
                            lookup_threads: spec.lookup_threads,
                            semantics: spec.semantics,
                            deterministic: spec.deterministic,
                            seed: spec.seed_base + rep as u64,
                            oracle_rcc,
                            ..EngineConfig::default()
                        };
                        let outcome = execute(query, web, &cfg)
                            .map_err(|e| e.to_string())
                            .and_then(|r| {
                                response_times::<f64>(&r.trace, r.solutions.len()).map_err(|e| e.to_string())
                            });
                        match outcome {
                            Ok(Some(rt)) => {
                                for (slot, m) in values.iter_mut().zip(Metric::ALL) {
                                    slot.push(rt.get(m));
                                }
                            }
                            Ok(None) => errors.push("empty result".to_string()),
                            Err(e) => errors.push(e),
                        }
                    }
                    errors.dedup();
                    for (vals, metric) in values.iter().zip(Metric::ALL) {
                        rows.push(CellResult {
                            web: web_name.clone(),
                            query: query_name.clone(),
                            strategy: strategy.name().to_string(),
                            policy: policy.to_string(),
                            metric,
                            gmean: geometric_mean(vals),
                            stdev: if vals.is_empty() { None } else { sample_stdev(vals) },
                            n: vals.len(),
                            error: (!errors.is_empty()).then(|| errors.join("; ")),
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

pub fn results_to_csv(rows: &[CellResult]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RESULTS_CSV_HEADER.split(',')).expect("in-memory write");
    let num = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.web.as_str(),
            &r.query,
            &r.strategy,
            &r.policy,
            r.metric.name(),
            &num(r.gmean),
            &num(r.stdev),
            &r.n.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV of UTF-8 fields")
}

pub fn parse_results_csv(text: &str) -> Result<Vec<CellResult>, ExperimentError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r
        .headers()
        .map_err(|e| ExperimentError::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.join(",") != RESULTS_CSV_HEADER {
        return Err(ExperimentError::Csv(format!("expected header {RESULTS_CSV_HEADER}")));
    }
    let opt = |s: &str| -> Result<Option<f64>, ExperimentError> {
        if s.is_empty() {
            Ok(None)
        } else {
            s.parse().map(Some).map_err(|_| ExperimentError::Csv(format!("bad number {s:?}")))
        }
    };
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| ExperimentError::Csv(e.to_string()))?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        out.push(CellResult {
            web: f(0).to_string(),
            query: f(1).to_string(),
            strategy: f(2).to_string(),
            policy: f(3).to_string(),
            metric: f(4).parse().map_err(ExperimentError::Csv)?,
            gmean: opt(f(5))?,
            stdev: opt(f(6))?,
            n: f(7).parse().map_err(|_| ExperimentError::Csv(format!("bad count {:?}", f(7))))?,
            error: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_parses_from_json_and_yaml() {
        let json = r#"{"webs":[{"path":"w"}],"queries":[{"text":"?s <http://ex.org/p> ?o ."}],"strategies":["baseline","pagerank"],"policies":["lr","static:0"]}"#;
        let a = ExperimentSpec::parse(json).unwrap();
        assert_eq!(a.repetitions, 5);
        assert_eq!(a.strategies, vec![StrategyKind::Baseline, StrategyKind::PageRank]);
        let yaml = "webs:\n  - base: base.nt\n    configs: [[1.0, 0.0]]\n    seed: 4\nqueries:\n  - path: q.rq\nrepetitions: 2\n";
        let b = ExperimentSpec::parse(yaml).unwrap();
        assert_eq!(b.repetitions, 2);
        assert!(matches!(&b.webs[0], WebSource::Generated { seed: 4, .. }));
        assert!(matches!(&a.webs[0], WebSource::Dir { .. }));
    }

    #[test]
    fn spec_rejects_bad_input() {
        assert!(ExperimentSpec::parse(r#"{"webs":[],"queries":[]}"#).is_err());
        assert!(ExperimentSpec::parse(r#"{"webs":[{"path":"w"}],"queries":[{"text":"x"}],"repetitions":0}"#).is_err());
        assert!(ExperimentSpec::parse(r#"{"webs":[{"path":"w"}],"queries":[{}]}"#).is_err());
        assert!(ExperimentSpec::parse(r#"{"webs":[{"path":"w"}],"queries":[{"text":"x"}],"bogus":1}"#).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![
            CellResult {
                web: "b/w0_0".into(),
                query: "q1".into(),
                strategy: "baseline".into(),
                policy: "static:1,0".into(),
                metric: Metric::RelRt50,
                gmean: Some(0.25),
                stdev: Some(0.0),
                n: 5,
                error: None,
            },
            CellResult {
                web: "b/w0_0".into(),
                query: "q1".into(),
                strategy: "oracle".into(),
                policy: "lr".into(),
                metric: Metric::RelRt1st,
                gmean: None,
                stdev: None,
                n: 0,
                error: None,
            },
        ];
        let text = results_to_csv(&rows);
        assert!(text.starts_with(RESULTS_CSV_HEADER));
        assert!(text.contains("\"static:1,0\""));
        assert_eq!(parse_results_csv(&text).unwrap(), rows);
    }
}
