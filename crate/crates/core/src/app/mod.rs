//! Experiment runners behind the `wmatch` command line.

mod analysis;
mod commands;
mod listen;

pub use analysis::{
    mapping_matches, write_series, AnalysisOptions, Analyzer, Hypothesis, PairSummary, SeriesRow,
    WindowSeparation, SERIES_HEADER,
};
pub use commands::{feed, replay, simulate, ReplayArgs, SimulateArgs};
pub use listen::{listen, ListenArgs, ObservationSource};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::matcher::{confidence, MatchReport};
use crate::net::{AddressStats, IngestCounters};
use crate::sim::TruthPair;

/// Process exit status contract: 0 success, 1 wrong or no mapping, 2 usage,
/// configuration or input error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    Mismatch = 1,
    Failure = 2,
}

impl Exit {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioDescriptor {
    pub name: String,
    pub mode: String,
    pub seed: Option<u64>,
    pub dt_s: Option<f64>,
    pub window: usize,
    pub min_samples: u64,
    pub warmup_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSummary {
    pub period_us: Option<u64>,
    pub addresses: BTreeMap<String, AddressStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: ScenarioDescriptor,
    /// `matched`, `mismatch`, `ambiguous` or `not_ready`.
    pub status: String,
    pub diagnostic: Option<String>,
    pub match_report: Option<MatchReport>,
    pub confidence: Vec<Option<f64>>,
    pub truth: Option<Vec<TruthPair>>,
    pub truth_matches: Option<bool>,
    pub pairs: Vec<PairSummary>,
    pub window_separation: Vec<WindowSeparation>,
    pub alignment: AlignmentSummary,
    pub ingest: Option<IngestCounters>,
    pub observations: u64,
    pub packets: u64,
    pub aligned_samples: u64,
    pub wall_clock_s: f64,
}

impl RunReport {
    /// JSON text with the wall-clock field zeroed, for reproducibility checks.
    pub fn deterministic_json(&self) -> String {
        let mut r = self.clone();
        r.wall_clock_s = 0.0;
        serde_json::to_string_pretty(&r).expect("report serialises")
    }
}

pub(crate) struct ReportInputs<'a> {
    pub descriptor: ScenarioDescriptor,
    pub analyzer: &'a Analyzer,
    pub hypotheses: &'a BTreeMap<String, Hypothesis>,
    pub truth: Option<Vec<TruthPair>>,
    pub ingest: Option<IngestCounters>,
    pub observations: u64,
    pub packets: u64,
    pub wall_clock_s: f64,
}

/// Builds the report and decides the exit status.
pub(crate) fn build_report(inp: ReportInputs<'_>) -> (RunReport, Exit) {
    let a = inp.analyzer;
    let (match_report, diagnostic) = match a.match_report() {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let truth_matches = match (&match_report, &inp.truth) {
        (Some(r), Some(t)) => Some(mapping_matches(r, t)),
        (None, Some(_)) => Some(false),
        _ => None,
    };
    let ambiguous = match_report
        .as_ref()
        .is_some_and(|r| r.mapping.is_empty() || r.mapping.iter().any(|p| p.margin == Some(0.0)));
    let (status, exit) = match (&match_report, truth_matches) {
        (None, _) => ("not_ready", Exit::Failure),
        (Some(_), Some(false)) => ("mismatch", Exit::Mismatch),
        (Some(_), Some(true)) => ("matched", Exit::Success),
        (Some(_), None) if ambiguous => ("ambiguous", Exit::Mismatch),
        (Some(_), None) => ("matched", Exit::Success),
    };
    let report = RunReport {
        scenario: inp.descriptor,
        status: status.into(),
        diagnostic,
        confidence: match_report
            .as_ref()
            .map(|r| {
                confidence(r)
                    .into_iter()
                    .map(|c| c.filter(|x| x.is_finite()))
                    .collect()
            })
            .unwrap_or_default(),
        window_separation: match_report
            .as_ref()
            .map(|r| a.window_separation(r))
            .unwrap_or_default(),
        match_report,
        truth: inp.truth,
        truth_matches,
        pairs: a.pair_summaries(inp.hypotheses),
        alignment: AlignmentSummary {
            period_us: a.period_us(),
            addresses: a.alignment(),
        },
        ingest: inp.ingest,
        observations: inp.observations,
        packets: inp.packets,
        aligned_samples: a.series().len() as u64,
        wall_clock_s: inp.wall_clock_s,
    };
    (report, exit)
}
