// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::{MetricsSummary, PerfError};
use crate::analytics::round1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioDirection {
    /// Lower is better (frame times, draw calls).
    Reduction,
    /// Higher is better (frame rate).
    Increase,
}

/// Relative improvement in percent, one decimal.
pub fn optimization_ratio(before: f64, after: f64, direction: RatioDirection) -> Result<f64, PerfError> {
    if !(before.is_finite() && before > 0.0) {
        return Err(PerfError::NonPositiveBaseline(before));
    }
    let delta = match direction {
        RatioDirection::Reduction => before - after,
        RatioDirection::Increase => after - before,
    };
    Ok(round1(100.0 * delta / before))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub metric: String,
    pub before: f64,
    pub after: f64,
    pub direction: RatioDirection,
    pub ratio_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn row(&self, metric: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }
}

pub const MAX_FRAME_TIME: &str = "Maximum frame time (ms)";
pub const AVG_FRAME_TIME: &str = "Average frame time (ms)";
pub const AVG_FRAME_RATE: &str = "Average frame rate (fps)";
pub const MAX_DRAW_CALLS: &str = "Maximum number of DrawCalls";
pub const AVG_DRAW_CALLS: &str = "Average number of DrawCalls";

/// Before/after rows for every metric both summaries carry. Metrics with a
/// non-positive baseline are skipped.
pub fn compare_runs(baseline: &MetricsSummary, optimized: &MetricsSummary) -> Comparison {
    let mut rows = Vec::new();
    let mut push = |metric: &str, before: f64, after: f64, direction| {
        if let Ok(ratio_percent) = optimization_ratio(before, after, direction) {
            rows.push(ComparisonRow { metric: metric.to_owned(), before, after, direction, ratio_percent });
        }
    };
    if let (Some(b), Some(a)) = (&baseline.frame_time, &optimized.frame_time) {
        push(MAX_FRAME_TIME, b.maximum_frame_time_ms, a.maximum_frame_time_ms, RatioDirection::Reduction);
        push(AVG_FRAME_TIME, b.average_frame_time_ms, a.average_frame_time_ms, RatioDirection::Reduction);
        push(AVG_FRAME_RATE, b.average_frame_rate_fps, a.average_frame_rate_fps, RatioDirection::Increase);
    }
    if let (Some(b), Some(a)) = (&baseline.draw_calls, &optimized.draw_calls) {
        push(MAX_DRAW_CALLS, b.peak, a.peak, RatioDirection::Reduction);
        push(AVG_DRAW_CALLS, b.average, a.average, RatioDirection::Reduction);
    }
    Comparison { rows }
}

pub fn render_comparison(c: &Comparison) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<30}{:>12}{:>12}{:>20}", "metric", "before", "after", "optimized ratio");
    for r in &c.rows {
        let word = match r.direction {
            RatioDirection::Reduction => "reduction",
            RatioDirection::Increase => "increase",
        };
        let _ =
            writeln!(out, "{:<30}{:>12.3}{:>12.3}{:>9.1}% {word:<10}", r.metric, r.before, r.after, r.ratio_percent);
    }
    out
}
