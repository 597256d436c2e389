// SPDX-License-Identifier: Apache-2.0

//! Performance lab: vertical-sync pacing, frame metrics, static draw-call
//! batching and before/after optimization ratios.
//!
//! These are models, not measurements. Traces either come from a file or
//! from the seeded generators in [`synth`]; nothing here talks to a GPU.

mod batching;
mod metrics;
mod pacing;
mod ratio;
pub mod synth;

pub use batching::{batch, draw_call_count, DrawCall, Mobility, SceneDescription, SceneObject};
pub use metrics::{summarize, DrawCallStats, FrameStats, MetricsSummary};
pub use pacing::{pace, parse_trace, FrameTrace, VSyncMode, VSyncPolicy};
pub use ratio::{compare_runs, optimization_ratio, render_comparison, Comparison, ComparisonRow, RatioDirection};

/// Neumaier-compensated sum. Plain summation drifts by a few ulps over
/// long traces, enough to push a mean below one refresh period.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        c += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + c
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PerfError {
    #[error("frame trace is empty")]
    EmptyTrace,
    #[error("frame {index} has non-positive time {value}")]
    NonPositiveFrame { index: usize, value: f64 },
    #[error("refresh rate must be positive, got {0}")]
    InvalidRefresh(f64),
    #[error("duplicate scene object `{0}`")]
    DuplicateObject(String),
    #[error("baseline must be positive, got {0}")]
    NonPositiveBaseline(f64),
    #[error("trace line {line}: {message}")]
    TraceParse { line: usize, message: String },
}
