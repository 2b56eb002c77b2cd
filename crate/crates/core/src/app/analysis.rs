use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::detector::{chi2_test, Channel, PairResiduals, TestKind, TestVerdict, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::matcher::{MatchReport, ScoreMatrix, DEFAULT_MIN_SAMPLES};
use crate::net::{AddressStats, AlignPolicy, AlignedSample, Aligner};
use crate::sim::{Observation, TruthPair};
use crate::net::PacketRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub window: usize,
    pub min_samples: u64,
    pub align: AlignPolicy,
    pub alpha: f64,
    /// Samples before this time after the first aligned sample are excluded
    /// from the windowed separation summary, s.
    pub warmup_s: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            window: DEFAULT_WINDOW,
            min_samples: DEFAULT_MIN_SAMPLES,
            align: AlignPolicy::default(),
            alpha: crate::detector::DEFAULT_ALPHA,
            warmup_s: 5.0,
        }
    }
}

/// Hypothesised honest residual variances for one address.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hypothesis {
    pub t1_v: f64,
    pub t2_v: f64,
}

/// Statistics of one pair after one aligned sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t_s: f64,
    pub address: String,
    pub visual_id: String,
    pub count: u64,
    pub t1_v: f64,
    pub t2_v: f64,
    pub t1_v_window: f64,
    pub t2_v_window: f64,
    pub t1_omega: f64,
    pub t2_omega: f64,
    pub t1_omega_window: f64,
    pub t2_omega_window: f64,
}

pub const SERIES_HEADER: &str = "t_s,address,visual_id,count,t1_v,t2_v,t1_v_window,t2_v_window,t1_omega,t2_omega,t1_omega_window,t2_omega_window";

pub fn write_series<W: Write>(mut w: W, rows: &[SeriesRow]) -> Result<()> {
    writeln!(w, "{SERIES_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.t_s,
            r.address,
            r.visual_id,
            r.count,
            r.t1_v,
            r.t2_v,
            r.t1_v_window,
            r.t2_v_window,
            r.t1_omega,
            r.t2_omega,
            r.t1_omega_window,
            r.t2_omega_window
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Per-pair summary in the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSummary {
    pub address: String,
    pub visual_id: String,
    pub count: u64,
    pub t1_v: Option<f64>,
    pub t2_v: Option<f64>,
    pub t1_omega: Option<f64>,
    pub t2_omega: Option<f64>,
    pub t1_v_verdict: Option<TestVerdict>,
    pub t2_v_verdict: Option<TestVerdict>,
}

/// How often a mapped pair's windowed Test-1 statistic is the lowest of its
/// address's row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSeparation {
    pub address: String,
    pub visual_id: String,
    pub windows: u64,
    pub lowest: u64,
    pub fraction: f64,
}

/// Streaming analysis: alignment, per-pair accumulation, time series.
pub struct Analyzer {
    options: AnalysisOptions,
    aligner: Aligner,
    matrix: ScoreMatrix,
    series: Vec<SeriesRow>,
    latest_t: Option<f64>,
}

impl Analyzer {
    pub fn new(options: AnalysisOptions) -> Result<Self> {
        if options.window == 0 {
            return Err(Error::Argument("window must be at least 1".into()));
        }
        Ok(Self {
            options,
            aligner: Aligner::new(options.align),
            matrix: ScoreMatrix::new(options.window, options.min_samples)?,
            series: Vec::new(),
            latest_t: None,
        })
    }

    pub fn options(&self) -> &AnalysisOptions {
        &self.options
    }

    pub fn push_packet(&mut self, rec: &PacketRecord) {
        self.aligner.push_packet(&rec.address, rec.packet);
        self.matrix.register_address(&rec.address);
        self.pump();
    }

    pub fn push_observation(&mut self, obs: Observation) {
        self.matrix.register_visual_id(&obs.visual_id);
        self.aligner.push_observation(obs);
        self.pump();
    }

    pub fn flush(&mut self) {
        self.aligner.flush();
        self.pump();
    }

    fn pump(&mut self) {
        for s in self.aligner.drain() {
            self.ingest(&s);
        }
    }

    fn ingest(&mut self, s: &AlignedSample) {
        let r = PairResiduals::compute(s.o_v, s.o_omega, s.u_g_v, s.u_g_omega, s.e_v, s.e_omega);
        self.matrix.ingest(&s.address, &s.visual_id, r);
        self.latest_t = Some(self.latest_t.map_or(s.t, |t| t.max(s.t)));
        let acc = self.matrix.cell(&s.address, &s.visual_id).expect("just ingested");
        let w = self.options.window;
        let run = |t, c| acc.running_mean(t, c).expect("non-empty");
        let win = |t, c| acc.windowed_stat(t, c, w).expect("non-empty");
        self.series.push(SeriesRow {
            t_s: s.t,
            address: s.address.clone(),
            visual_id: s.visual_id.clone(),
            count: acc.count(),
            t1_v: run(TestKind::T1, Channel::Velocity),
            t2_v: run(TestKind::T2, Channel::Velocity),
            t1_v_window: win(TestKind::T1, Channel::Velocity),
            t2_v_window: win(TestKind::T2, Channel::Velocity),
            t1_omega: run(TestKind::T1, Channel::Angular),
            t2_omega: run(TestKind::T2, Channel::Angular),
            t1_omega_window: win(TestKind::T1, Channel::Angular),
            t2_omega_window: win(TestKind::T2, Channel::Angular),
        });
    }

    pub fn matrix(&self) -> &ScoreMatrix {
        &self.matrix
    }

    pub fn series(&self) -> &[SeriesRow] {
        &self.series
    }

    pub fn alignment(&self) -> BTreeMap<String, AddressStats> {
        self.aligner.stats()
    }

    pub fn period_us(&self) -> Option<u64> {
        self.aligner.period_us()
    }

    /// Current mapping, or the reason none is available yet.
    pub fn match_report(&self) -> Result<MatchReport> {
        let mut r = self.matrix.full_assignment()?;
        r.timestamp_s = self.latest_t;
        Ok(r)
    }

    pub fn pair_summaries(&self, hypotheses: &BTreeMap<String, Hypothesis>) -> Vec<PairSummary> {
        let alpha = self.options.alpha;
        self.matrix
            .cells()
            .map(|(a, v, acc)| {
                let s1 = acc.series(TestKind::T1, Channel::Velocity);
                let s2 = acc.series(TestKind::T2, Channel::Velocity);
                let h = hypotheses.get(a);
                PairSummary {
                    address: a.to_string(),
                    visual_id: v.to_string(),
                    count: acc.count(),
                    t1_v: s1.running_mean(),
                    t2_v: s2.running_mean(),
                    t1_omega: acc.running_mean(TestKind::T1, Channel::Angular),
                    t2_omega: acc.running_mean(TestKind::T2, Channel::Angular),
                    t1_v_verdict: h.and_then(|h| chi2_test(s1.sum_sq(), s1.count(), h.t1_v, alpha).ok()),
                    t2_v_verdict: h.and_then(|h| chi2_test(s2.sum_sq(), s2.count(), h.t2_v, alpha).ok()),
                }
            })
            .collect()
    }

    /// For every mapped pair, the fraction of post-warmup sample times at
    /// which its windowed Test-1 statistic is strictly below that of every
    /// other visual ID paired with the same address.
    pub fn window_separation(&self, report: &MatchReport) -> Vec<WindowSeparation> {
        let start = self.series.first().map_or(0.0, |r| r.t_s);
        let cutoff = start + self.options.warmup_s;
        report
            .mapping
            .iter()
            .map(|m| {
                // t (as bits, times are non-negative) -> (matched, best other)
                let mut at: BTreeMap<u64, (Option<f64>, Option<f64>)> = BTreeMap::new();
                for r in self.series.iter().filter(|r| r.address == m.address && r.t_s >= cutoff) {
                    let e = at.entry(r.t_s.to_bits()).or_default();
                    if r.visual_id == m.visual_id {
                        e.0 = Some(r.t1_v_window);
                    } else {
                        e.1 = Some(e.1.map_or(r.t1_v_window, |b: f64| b.min(r.t1_v_window)));
                    }
                }
                let mut windows = 0;
                let mut lowest = 0;
                for (matched, other) in at.values() {
                    if let (Some(mv), Some(ov)) = (matched, other) {
                        windows += 1;
                        if mv < ov {
                            lowest += 1;
                        }
                    }
                }
                WindowSeparation {
                    address: m.address.clone(),
                    visual_id: m.visual_id.clone(),
                    windows,
                    lowest,
                    fraction: if windows > 0 { lowest as f64 / windows as f64 } else { 0.0 },
                }
            })
            .collect()
    }
}

/// Compares a mapping with ground truth restricted to the addresses present
/// in the truth table.
pub fn mapping_matches(report: &MatchReport, truth: &[TruthPair]) -> bool {
    let mut expect: Vec<(String, String)> = truth
        .iter()
        .map(|t| (t.address.clone(), t.visual_id.clone()))
        .collect();
    expect.sort();
    !expect.is_empty() && report.pairs() == expect
}
