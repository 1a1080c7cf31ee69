use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Timing of a synchronized long exposure and short-exposure burst.
///
/// The long exposure starts at `t0` and lasts `dt_long`; burst frame `i`
/// starts at `frame_starts[i]` and lasts `dt_short`. Dead time between
/// consecutive burst frames is the read-out gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureTimeline {
    pub t0: f64,
    pub dt_long: f64,
    pub dt_short: f64,
    pub frame_starts: Vec<f64>,
}

impl CaptureTimeline {
    pub fn new(t0: f64, dt_long: f64, dt_short: f64, frame_starts: Vec<f64>) -> Result<Self> {
        let tl = Self {
            t0,
            dt_long,
            dt_short,
            frame_starts,
        };
        tl.validate()?;
        Ok(tl)
    }

    /// Timeline of a burst built from `2n - 1` source frames of length
    /// `frame_period` by keeping every other frame, while the long exposure
    /// integrates all of them.
    pub fn from_sequence(n: usize, frame_period: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("burst size must be at least 1"));
        }
        let starts = (0..n).map(|i| 2.0 * i as f64 * frame_period).collect();
        Self::new(0.0, (2 * n - 1) as f64 * frame_period, frame_period, starts)
    }

    pub fn burst_size(&self) -> usize {
        self.frame_starts.len()
    }

    /// 0-based index of the middle (reference) frame.
    pub fn reference_index(&self) -> usize {
        self.frame_starts.len() / 2
    }

    /// Dead time between consecutive burst frames.
    pub fn readout_gaps(&self) -> Vec<f64> {
        self.frame_starts
            .windows(2)
            .map(|w| w[1] - w[0] - self.dt_short)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.frame_starts.len();
        if n % 2 == 0 {
            return Err(Error::invalid(format!("burst size must be odd, got {n}")));
        }
        if !(self.dt_short > 0.0 && self.dt_long > 0.0) {
            return Err(Error::invalid("exposure times must be positive"));
        }
        let first = self.frame_starts[0];
        let last = self.frame_starts[n - 1];
        let eps = 1e-12 * self.dt_long.max(1.0);
        if first + eps < self.t0 || last + self.dt_short > self.t0 + self.dt_long + eps {
            return Err(Error::invalid(
                "burst must lie inside the long exposure interval",
            ));
        }
        if self.readout_gaps().iter().any(|&g| g < -eps) {
            return Err(Error::invalid("burst frames overlap"));
        }
        Ok(())
    }
}
