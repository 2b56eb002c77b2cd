//! All-pairs score matrix and the address to visual-ID mapping.
//!
//! Every transmitting address is paired with every visual ID the sensor has
//! reported. The Test-1 running averages form a cost matrix; the mapping is
//! the minimum-cost injective assignment over it. Test-2 averages are kept
//! and reported alongside but do not drive the assignment, since two
//! vehicles applying the same policy inputs are indistinguishable under it.

pub mod assignment;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::detector::{Channel, PairAccumulator, PairResiduals, TestKind, DEFAULT_WINDOW};
use crate::error::{Error, Result};

/// Aligned samples a pair needs before it takes part in matching.
pub const DEFAULT_MIN_SAMPLES: u64 = 20;

#[derive(Debug, Clone)]
pub struct ScoreMatrix {
    addresses: Vec<String>,
    visual_ids: Vec<String>,
    cells: BTreeMap<(String, String), PairAccumulator>,
    window: usize,
    min_samples: u64,
    channel: Channel,
}

impl Default for ScoreMatrix {
    fn default() -> Self {
        Self {
            addresses: Vec::new(),
            visual_ids: Vec::new(),
            cells: BTreeMap::new(),
            window: DEFAULT_WINDOW,
            min_samples: DEFAULT_MIN_SAMPLES,
            channel: Channel::Velocity,
        }
    }
}

impl ScoreMatrix {
    pub fn new(window: usize, min_samples: u64) -> Result<Self> {
        if window == 0 {
            return Err(Error::argument("window length must be at least 1"));
        }
        Ok(Self {
            window,
            min_samples,
            ..Self::default()
        })
    }

    /// Channel whose Test-1 average is used as the assignment cost.
    pub fn with_channel(mut self, channel: Channel) -> Self {
        self.channel = channel;
        self
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn min_samples(&self) -> u64 {
        self.min_samples
    }

    /// Addresses in order of first appearance.
    pub fn addresses(&self) -> &[String] {
        &self.addresses
    }

    /// Visual IDs in order of first appearance.
    pub fn visual_ids(&self) -> &[String] {
        &self.visual_ids
    }

    pub fn register_address(&mut self, address: &str) {
        if !self.addresses.iter().any(|a| a == address) {
            self.addresses.push(address.to_owned());
        }
    }

    pub fn register_visual_id(&mut self, visual_id: &str) {
        if !self.visual_ids.iter().any(|v| v == visual_id) {
            self.visual_ids.push(visual_id.to_owned());
        }
    }

    pub fn ingest(&mut self, address: &str, visual_id: &str, residuals: PairResiduals) {
        self.register_address(address);
        self.register_visual_id(visual_id);
        let window = self.window;
        self.cells
            .entry((address.to_owned(), visual_id.to_owned()))
            .or_insert_with(|| PairAccumulator::new(window).expect("window validated"))
            .update(residuals);
    }

    pub fn cell(&self, address: &str, visual_id: &str) -> Option<&PairAccumulator> {
        self.cells.get(&(address.to_owned(), visual_id.to_owned()))
    }

    /// All populated cells in lexicographic (address, visual ID) order.
    pub fn cells(&self) -> impl Iterator<Item = (&str, &str, &PairAccumulator)> {
        self.cells
            .iter()
            .map(|((a, v), acc)| (a.as_str(), v.as_str(), acc))
    }

    fn sorted_axes(&self) -> (Vec<&String>, Vec<&String>) {
        let mut addrs: Vec<&String> = self.addresses.iter().collect();
        let mut vids: Vec<&String> = self.visual_ids.iter().collect();
        addrs.sort();
        vids.sort();
        (addrs, vids)
    }

    fn check_ready(&self) -> Result<()> {
        if self.addresses.is_empty() || self.visual_ids.is_empty() {
            return Err(Error::NotReady("no address/visual-ID pairs observed".into()));
        }
        for a in &self.addresses {
            for v in &self.visual_ids {
                let count = self.cell(a, v).map_or(0, |c| c.count());
                if count < self.min_samples {
                    return Err(Error::NotReady(format!(
                        "pair ({a}, {v}) has {count} aligned samples, need {}",
                        self.min_samples
                    )));
                }
            }
        }
        Ok(())
    }

    fn stat(&self, a: &str, v: &str, test: TestKind) -> f64 {
        self.cell(a, v)
            .and_then(|c| c.running_mean(test, self.channel))
            .expect("readiness checked")
    }

    /// Pair with the smallest running average for `test`. Ties go to the
    /// lexicographically smallest (address, visual ID).
    pub fn best_pair(&self, test: TestKind) -> Result<(String, String)> {
        self.check_ready()?;
        let (addrs, vids) = self.sorted_axes();
        let mut best: Option<(f64, &String, &String)> = None;
        for a in &addrs {
            for v in &vids {
                let s = self.stat(a, v, test);
                if best.is_none_or(|(b, _, _)| s < b) {
                    best = Some((s, a, v));
                }
            }
        }
        let (_, a, v) = best.expect("non-empty axes");
        Ok((a.clone(), v.clone()))
    }

    /// Minimum total Test-1 cost injective mapping with per-row margins.
    pub fn full_assignment(&self) -> Result<MatchReport> {
        self.check_ready()?;
        let (addrs, vids) = self.sorted_axes();
        let costs: Vec<Vec<f64>> = addrs
            .iter()
            .map(|a| vids.iter().map(|v| self.stat(a, v, TestKind::T1)).collect())
            .collect();
        let assignment = assignment::solve(&costs);

        let mut mapping = Vec::new();
        let mut unmatched_addresses = Vec::new();
        let mut used = vec![false; vids.len()];
        for (r, col) in assignment.iter().enumerate() {
            let Some(c) = *col else {
                unmatched_addresses.push(addrs[r].clone());
                continue;
            };
            used[c] = true;
            let runner_up = costs[r]
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != c)
                .map(|(_, &x)| x)
                .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.min(x))));
            let t1 = costs[r][c];
            let cell = self.cell(addrs[r], vids[c]).expect("readiness checked");
            mapping.push(MatchedPair {
                address: addrs[r].clone(),
                visual_id: vids[c].clone(),
                t1,
                t2: self.stat(addrs[r], vids[c], TestKind::T2),
                runner_up,
                margin: runner_up.map(|ru| (ru - t1).max(0.0)),
                count: cell.count(),
            });
        }
        let unmatched_visual_ids = vids
            .iter()
            .zip(&used)
            .filter(|(_, &u)| !u)
            .map(|(v, _)| (*v).clone())
            .collect();

        Ok(MatchReport {
            channel: self.channel,
            total_cost: assignment::total_cost(&costs, &assignment),
            mapping,
            unmatched_addresses,
            unmatched_visual_ids,
            best_t1: self.best_pair(TestKind::T1)?,
            best_t2: self.best_pair(TestKind::T2)?,
            timestamp_s: None,
        })
    }
}

/// One matched (address, visual ID) pair with its statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub address: String,
    pub visual_id: String,
    /// Test-1 running average; the assignment cost.
    pub t1: f64,
    /// Test-2 running average.
    pub t2: f64,
    /// Smallest Test-1 average among the other visual IDs of this address.
    pub runner_up: Option<f64>,
    /// `runner_up - t1`, floored at zero.
    pub margin: Option<f64>,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub channel: Channel,
    pub mapping: Vec<MatchedPair>,
    pub unmatched_addresses: Vec<String>,
    pub unmatched_visual_ids: Vec<String>,
    pub total_cost: f64,
    /// Joint argmin of each test taken on its own.
    pub best_t1: (String, String),
    pub best_t2: (String, String),
    /// Sample time of the newest data behind the report.
    pub timestamp_s: Option<f64>,
}

impl MatchReport {
    pub fn visual_id_for(&self, address: &str) -> Option<&str> {
        self.mapping
            .iter()
            .find(|p| p.address == address)
            .map(|p| p.visual_id.as_str())
    }

    /// Mapping as sorted (address, visual ID) pairs.
    pub fn pairs(&self) -> Vec<(String, String)> {
        let mut v: Vec<_> = self
            .mapping
            .iter()
            .map(|p| (p.address.clone(), p.visual_id.clone()))
            .collect();
        v.sort();
        v
    }
}

/// Margin relative to the chosen statistic, per mapped pair. Pairs with no
/// runner-up get `None`; a positive margin over a zero statistic is infinite.
pub fn confidence(report: &MatchReport) -> Vec<Option<f64>> {
    report
        .mapping
        .iter()
        .map(|p| {
            p.margin.map(|m| {
                if m == 0.0 {
                    0.0
                } else {
                    m / p.t1
                }
            })
        })
        .collect()
}
