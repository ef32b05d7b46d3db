//! Response-time metrics, experiment sweeps and their reports.

mod compare;
mod dominance;
mod dryrun;
mod experiment;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{EventKind, ExecutionTrace};
use crate::num::Scalar;

pub use compare::{comparison_report, phi1_from_label, ComparisonReport, ComparisonRow, Subset, COMPARISON_CSV_HEADER};
pub use dominance::{dominance_experiment, DominanceReport, DominanceRow};
pub use dryrun::{rcc_dry_run, read_rcc_map, write_rcc_map};
pub use experiment::{
    parse_results_csv, results_to_csv, run_experiment, CellResult, ExperimentError, ExperimentSpec, QuerySource,
    WebSource, RESULTS_CSV_HEADER,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("trace has no exec_start/exec_end pair")]
    Incomplete,
    #[error("execution took no time; relative response times are undefined")]
    ZeroDuration,
    #[error("trace has {emitted} solutions but the result has {cardinality}")]
    MissingSolutions { emitted: usize, cardinality: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Metric {
    #[serde(rename = "relRT1st")]
    RelRt1st,
    #[serde(rename = "relRT50")]
    RelRt50,
    #[serde(rename = "relRTCmpl")]
    RelRtCmpl,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::RelRt1st, Metric::RelRt50, Metric::RelRtCmpl];

    pub fn name(self) -> &'static str {
        match self {
            Metric::RelRt1st => "relRT1st",
            Metric::RelRt50 => "relRT50",
            Metric::RelRtCmpl => "relRTCmpl",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown metric {s:?}"))
    }
}

/// Absolute and relative response times of one execution with a non-empty
/// result. Times are in trace units (microseconds).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResponseTimes<F> {
    pub t_start: u64,
    pub t_1st: u64,
    pub t_50: u64,
    pub t_last: u64,
    pub t_end: u64,
    pub rel_rt_1st: F,
    pub rel_rt_50: F,
    pub rel_rt_cmpl: F,
}

impl<F: Scalar> ResponseTimes<F> {
    pub fn get(&self, m: Metric) -> F {
        match m {
            Metric::RelRt1st => self.rel_rt_1st,
            Metric::RelRt50 => self.rel_rt_50,
            Metric::RelRtCmpl => self.rel_rt_cmpl,
        }
    }
}

/// Response times of an execution whose result has `cardinality`
/// solutions. `Ok(None)` for an empty result.
///
/// The half-way point is the emission of solution number
/// `ceil(cardinality / 2)`, so a single solution gives `relRT50 == relRT1st`.
pub fn response_times<F: Scalar>(
    trace: &ExecutionTrace,
    cardinality: usize,
) -> Result<Option<ResponseTimes<F>>, MetricsError> {
    let (Some(t_start), Some(t_end)) = (trace.start(), trace.end()) else {
        return Err(MetricsError::Incomplete);
    };
    if cardinality == 0 {
        return Ok(None);
    }
    let times: Vec<u64> = trace
        .events
        .iter()
        .filter(|e| e.event == EventKind::SolutionEmitted)
        .map(|e| e.t)
        .collect();
    if times.len() < cardinality {
        return Err(MetricsError::MissingSolutions {
            emitted: times.len(),
            cardinality,
        });
    }
    if t_end <= t_start {
        return Err(MetricsError::ZeroDuration);
    }
    let t_1st = times[0];
    let t_50 = times[cardinality.div_ceil(2) - 1];
    let t_last = times[cardinality - 1];
    let span = F::of_u64(t_end - t_start);
    let rel = |t: u64| F::of_u64(t.saturating_sub(t_start)) / span;
    Ok(Some(ResponseTimes {
        t_start,
        t_1st,
        t_50,
        t_last,
        t_end,
        rel_rt_1st: rel(t_1st),
        rel_rt_50: rel(t_50),
        rel_rt_cmpl: rel(t_last),
    }))
}
