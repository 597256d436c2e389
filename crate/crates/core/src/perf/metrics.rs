// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::FrameTrace;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStats {
    pub frames: usize,
    pub average_frame_time_ms: f64,
    pub maximum_frame_time_ms: f64,
    /// Mean of per-frame rates `1000 / t`.
    pub average_frame_rate_fps: f64,
    /// `1000 / average_frame_time_ms`. Differs from the mean of per-frame
    /// rates whenever frame times vary.
    pub fps_of_mean_frame_time: f64,
}

impl FrameStats {
    /// Stats known only by their headline numbers (e.g. a published table).
    pub fn from_headline(maximum_ms: f64, average_ms: f64, average_fps: f64) -> Self {
        Self {
            frames: 0,
            average_frame_time_ms: average_ms,
            maximum_frame_time_ms: maximum_ms,
            average_frame_rate_fps: average_fps,
            fps_of_mean_frame_time: 1000.0 / average_ms,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawCallStats {
    pub peak: f64,
    pub average: f64,
}

impl DrawCallStats {
    /// From per-frame draw-call counts. `None` when there are none.
    pub fn from_counts(counts: &[usize]) -> Option<Self> {
        let peak = *counts.iter().max()?;
        let average = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        Some(Self { peak: peak as f64, average })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsSummary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_time: Option<FrameStats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub draw_calls: Option<DrawCallStats>,
    /// Passed through from an external profiler; never computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reserved_memory_peak_mb: Option<f64>,
}

impl MetricsSummary {
    pub fn with_draw_calls(mut self, stats: DrawCallStats) -> Self {
        self.draw_calls = Some(stats);
        self
    }
}

pub fn summarize(trace: &FrameTrace) -> MetricsSummary {
    let times = trace.times();
    let n = times.len() as f64;
    let average = trace.mean();
    let maximum = times.iter().copied().fold(f64::MIN, f64::max);
    let average_rate = super::compensated_sum(times.iter().map(|t| 1000.0 / t)) / n;
    MetricsSummary {
        frame_time: Some(FrameStats {
            frames: times.len(),
            average_frame_time_ms: average,
            maximum_frame_time_ms: maximum,
            average_frame_rate_fps: average_rate,
            fps_of_mean_frame_time: 1000.0 / average,
        }),
        draw_calls: None,
        reserved_memory_peak_mb: None,
    }
}
