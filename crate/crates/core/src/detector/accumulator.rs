use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default moving-window length, in aligned samples.
pub const DEFAULT_WINDOW: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestKind {
    /// Watermark subtracted; honest limit is the process-noise variance.
    T1,
    /// Watermark retained; honest limit adds the watermark variance.
    T2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Velocity,
    Angular,
}

/// Running and moving-window mean of squared residuals for one test on one
/// channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries {
    count: u64,
    sum_sq: f64,
    window: VecDeque<f64>,
    capacity: usize,
}

impl ResidualSeries {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::argument("window capacity must be at least 1"));
        }
        Ok(Self {
            count: 0,
            sum_sq: 0.0,
            window: VecDeque::with_capacity(capacity),
            capacity,
        })
    }

    pub fn push(&mut self, residual: f64) {
        let sq = residual * residual;
        self.count += 1;
        self.sum_sq += sq;
        if self.window.len() == self.capacity {
            self.window.pop_front();
        }
        self.window.push_back(sq);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum_sq(&self) -> f64 {
        self.sum_sq
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Squared residuals currently held, oldest first.
    pub fn window(&self) -> impl Iterator<Item = f64> + '_ {
        self.window.iter().copied()
    }

    /// Mean of all squared residuals so far, or `None` before the first one.
    pub fn running_mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum_sq / self.count as f64)
    }

    /// Mean of the `w` most recent squared residuals. Partial windows use
    /// every sample available.
    pub fn windowed_mean(&self, w: usize) -> Result<f64> {
        if w == 0 {
            return Err(Error::argument("window length must be at least 1"));
        }
        if w > self.capacity {
            return Err(Error::argument(format!(
                "window length {w} exceeds stored capacity {}",
                self.capacity
            )));
        }
        if self.count == 0 {
            return Err(Error::NotReady("no residuals accumulated".into()));
        }
        let n = w.min(self.window.len());
        let sum: f64 = self.window.iter().skip(self.window.len() - n).sum();
        Ok(sum / n as f64)
    }
}

/// Aligned residuals for one (address, visual ID) pair at one tick.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PairResiduals {
    pub v1: f64,
    pub v2: f64,
    pub omega1: f64,
    pub omega2: f64,
}

impl PairResiduals {
    /// Residuals of one observation against one packet.
    pub fn compute(
        o_v: f64,
        o_omega: f64,
        u_g_v: f64,
        u_g_omega: f64,
        e_v: f64,
        e_omega: f64,
    ) -> Self {
        Self {
            v1: super::residual_v1(o_v, u_g_v, e_v),
            v2: super::residual_v2(o_v, u_g_v),
            omega1: super::residual_v1(o_omega, u_g_omega, e_omega),
            omega2: super::residual_v2(o_omega, u_g_omega),
        }
    }
}

/// Per-pair statistics: both tests on both channels.
#[derive(Debug, Clone, PartialEq)]
pub struct PairAccumulator {
    v1: ResidualSeries,
    v2: ResidualSeries,
    omega1: ResidualSeries,
    omega2: ResidualSeries,
}

impl Default for PairAccumulator {
    fn default() -> Self {
        Self::new(DEFAULT_WINDOW).expect("default window is non-zero")
    }
}

impl PairAccumulator {
    pub fn new(window: usize) -> Result<Self> {
        Ok(Self {
            v1: ResidualSeries::new(window)?,
            v2: ResidualSeries::new(window)?,
            omega1: ResidualSeries::new(window)?,
            omega2: ResidualSeries::new(window)?,
        })
    }

    pub fn update(&mut self, r: PairResiduals) {
        self.v1.push(r.v1);
        self.v2.push(r.v2);
        self.omega1.push(r.omega1);
        self.omega2.push(r.omega2);
    }

    pub fn count(&self) -> u64 {
        self.v1.count()
    }

    pub fn series(&self, test: TestKind, channel: Channel) -> &ResidualSeries {
        match (test, channel) {
            (TestKind::T1, Channel::Velocity) => &self.v1,
            (TestKind::T2, Channel::Velocity) => &self.v2,
            (TestKind::T1, Channel::Angular) => &self.omega1,
            (TestKind::T2, Channel::Angular) => &self.omega2,
        }
    }

    pub fn running_mean(&self, test: TestKind, channel: Channel) -> Option<f64> {
        self.series(test, channel).running_mean()
    }

    pub fn windowed_stat(&self, test: TestKind, channel: Channel, w: usize) -> Result<f64> {
        self.series(test, channel).windowed_mean(w)
    }
}
