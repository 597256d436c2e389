// SPDX-License-Identifier: Apache-2.0

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PerfError;

/// Per-frame times in milliseconds, all positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct FrameTrace(Vec<f64>);

impl FrameTrace {
    pub fn new(times_ms: Vec<f64>) -> Result<Self, PerfError> {
        if times_ms.is_empty() {
            return Err(PerfError::EmptyTrace);
        }
        if let Some((index, &value)) = times_ms.iter().enumerate().find(|(_, t)| !(t.is_finite() && **t > 0.0)) {
            return Err(PerfError::NonPositiveFrame { index, value });
        }
        Ok(Self(times_ms))
    }

    pub fn times(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        super::compensated_sum(self.0.iter().copied()) / self.0.len() as f64
    }
}

impl TryFrom<Vec<f64>> for FrameTrace {
    type Error = PerfError;

    fn try_from(v: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<FrameTrace> for Vec<f64> {
    fn from(t: FrameTrace) -> Self {
        t.0
    }
}

/// One frame time per line; blank lines and `#` comments are skipped.
pub fn parse_trace(text: &str) -> Result<FrameTrace, PerfError> {
    let mut times = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let t: f64 = line.parse().map_err(|e| PerfError::TraceParse { line: i + 1, message: format!("{e}") })?;
        times.push(t);
    }
    FrameTrace::new(times)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VSyncPolicy {
    /// Present as soon as the frame is ready.
    DontSync,
    /// Present on the next vertical blank.
    EveryVBlank,
    /// Present on every second vertical blank.
    EverySecondVBlank,
}

impl VSyncPolicy {
    pub const ALL: [VSyncPolicy; 3] = [Self::DontSync, Self::EveryVBlank, Self::EverySecondVBlank];
}

impl FromStr for VSyncPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "dontsync" | "off" => Ok(Self::DontSync),
            "every" | "everyvblank" => Ok(Self::EveryVBlank),
            "everysecond" | "everysecondvblank" => Ok(Self::EverySecondVBlank),
            _ => Err(format!("unknown vsync policy `{s}` (expected dontsync, every or everysecond)")),
        }
    }
}

impl fmt::Display for VSyncPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::DontSync => "dontsync",
            Self::EveryVBlank => "every",
            Self::EverySecondVBlank => "everysecond",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VSyncMode {
    pub policy: VSyncPolicy,
    pub refresh_hz: f64,
}

impl VSyncMode {
    pub fn new(policy: VSyncPolicy, refresh_hz: f64) -> Result<Self, PerfError> {
        if !(refresh_hz.is_finite() && refresh_hz > 0.0) {
            return Err(PerfError::InvalidRefresh(refresh_hz));
        }
        Ok(Self { policy, refresh_hz })
    }

    pub fn refresh_period_ms(&self) -> f64 {
        1000.0 / self.refresh_hz
    }

    /// Time a frame that took `t` ms to render stays on screen.
    pub fn displayed(&self, t: f64) -> f64 {
        let period = self.refresh_period_ms();
        match self.policy {
            VSyncPolicy::DontSync => t,
            VSyncPolicy::EveryVBlank => quantize(t, period),
            VSyncPolicy::EverySecondVBlank => quantize(t, 2.0 * period),
        }
    }
}

/// Smallest positive multiple of `period` that is at least `t`.
fn quantize(t: f64, period: f64) -> f64 {
    let mut k = (t / period).ceil().max(1.0);
    // Division rounding can land one period off in either direction.
    if k > 1.0 && (k - 1.0) * period >= t {
        k -= 1.0;
    }
    if k * period < t {
        k += 1.0;
    }
    k * period
}

/// Displayed frame times under `vsync`. Never shorter than the raw times.
pub fn pace(trace: &FrameTrace, vsync: VSyncMode) -> FrameTrace {
    FrameTrace(trace.times().iter().map(|&t| vsync.displayed(t)).collect())
}
