//! Share of cases in which a strategy is at least 10% worse or better than
//! the baseline.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::{CellResult, Metric};
use crate::priority::StrategyKind;

pub const COMPARISON_CSV_HEADER: &str = "strategy,policy,subset,relRT1st_worse,relRT1st_better,relRT50_worse,relRT50_better,relRTCmpl_worse,relRTCmpl_better,cases,missing_baseline,errored";

const THRESHOLD: f64 = 0.1;

/// Which webs a row covers, by their `phi1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    All,
    /// `phi1 >= 0.66`
    Dense,
    /// `phi1 <= 0.33`
    Sparse,
}

impl Subset {
    fn admits(self, phi1: Option<f64>) -> bool {
        match self {
            Subset::All => true,
            Subset::Dense => phi1.is_some_and(|p| p >= 0.66),
            Subset::Sparse => phi1.is_some_and(|p| p <= 0.33),
        }
    }
}

impl fmt::Display for Subset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Subset::All => "all",
            Subset::Dense => "dense",
            Subset::Sparse => "sparse",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub strategy: String,
    pub policy: String,
    pub subset: Subset,
    /// Per metric (in [`Metric::ALL`] order): cases worse, cases better.
    pub worse: [usize; 3],
    pub better: [usize; 3],
    /// Cases with a complete baseline and a complete strategy measurement.
    pub cases: usize,
    /// Cases left out because the baseline cell is absent or incomplete.
    pub missing_baseline: usize,
    /// Cases left out because the strategy's own cell is incomplete.
    pub errored: usize,
}

impl ComparisonRow {
    pub fn pct_worse(&self, m: Metric) -> Option<f64> {
        self.pct(self.worse[metric_index(m)])
    }

    pub fn pct_better(&self, m: Metric) -> Option<f64> {
        self.pct(self.better[metric_index(m)])
    }

    fn pct(&self, count: usize) -> Option<f64> {
        (self.cases > 0).then(|| 100.0 * count as f64 / self.cases as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    pub fn row(&self, strategy: &str, policy: &str, subset: Subset) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy && r.policy == policy && r.subset == subset)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(COMPARISON_CSV_HEADER.split(',')).expect("in-memory write");
        let pct = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            let mut rec = vec![r.strategy.clone(), r.policy.clone(), r.subset.to_string()];
            for m in Metric::ALL {
                rec.push(pct(r.pct_worse(m)));
                rec.push(pct(r.pct_better(m)));
            }
            rec.push(r.cases.to_string());
            rec.push(r.missing_baseline.to_string());
            rec.push(r.errored.to_string());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV of UTF-8 fields")
    }
}

fn metric_index(m: Metric) -> usize {
    Metric::ALL.iter().position(|x| *x == m).expect("metric listed")
}

/// `phi1` of a generated web named `.../w62_47` or `.../w100`.
pub fn phi1_from_label(web: &str) -> Option<f64> {
    let label = web.rsplit('/').next()?.strip_prefix('w')?;
    let phi1 = label.split('_').next()?;
    phi1.parse::<u32>().ok().map(|p| p as f64 / 100.0)
}

type Case = (String, String);
type Values = [Option<f64>; 3];

/// Compares every non-baseline strategy with the baseline under the same
/// routing policy. A case is a (web, query) pair. A strategy value `s` is
/// worse than the baseline value `b` iff `s >= 1.1 b` and `s > b`, and better
/// iff `s <= 0.9 b` and `s < b`.
///
/// Rows come for all cases and for the dense and sparse subsets, with `phi1`
/// taken from the web name by `phi1_of`.
pub fn comparison_report(results: &[CellResult], phi1_of: impl Fn(&str) -> Option<f64>) -> ComparisonReport {
    let baseline = StrategyKind::Baseline.name();
    let mut table: BTreeMap<(String, String), BTreeMap<Case, Values>> = BTreeMap::new();
    for r in results {
        let v = table
            .entry((r.strategy.clone(), r.policy.clone()))
            .or_default()
            .entry((r.web.clone(), r.query.clone()))
            .or_insert([None; 3]);
        v[metric_index(r.metric)] = r.gmean;
    }
    let complete = |v: &Values| v.iter().all(Option::is_some);

    let mut rows = Vec::new();
    let strategies: BTreeSet<&(String, String)> = table.keys().filter(|(s, _)| s != baseline).collect();
    for key @ (strategy, policy) in strategies {
        let base = table.get(&(baseline.to_string(), policy.clone()));
        for subset in [Subset::All, Subset::Dense, Subset::Sparse] {
            let mut row = ComparisonRow {
                strategy: strategy.clone(),
                policy: policy.clone(),
                subset,
                worse: [0; 3],
                better: [0; 3],
                cases: 0,
                missing_baseline: 0,
                errored: 0,
            };
            for (case, vals) in &table[key] {
                if !subset.admits(phi1_of(&case.0)) {
                    continue;
                }
                let Some(b) = base.and_then(|m| m.get(case)).filter(|b| complete(b)) else {
                    row.missing_baseline += 1;
                    continue;
                };
                if !complete(vals) {
                    row.errored += 1;
                    continue;
                }
                row.cases += 1;
                for i in 0..3 {
                    let (s, b) = (vals[i].unwrap_or_default(), b[i].unwrap_or_default());
                    if s >= (1.0 + THRESHOLD) * b && s > b {
                        row.worse[i] += 1;
                    } else if s <= (1.0 - THRESHOLD) * b && s < b {
                        row.better[i] += 1;
                    }
                }
            }
            rows.push(row);
        }
    }
    ComparisonReport { rows }
}
