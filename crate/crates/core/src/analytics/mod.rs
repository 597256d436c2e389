// SPDX-License-Identifier: Apache-2.0

//! Cohort analytics: score bands, band distributions, per-stage correctness
//! rates and the three-question efficiency rubric.
//!
//! Percentages are reported to two decimals (e.g. 8 of 13 is 61.54).

mod cohort;
mod report;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use cohort::{read_cohorts_csv, CohortRecord, CsvError, StudentResult};
pub use report::{render_text, CohortReport, RubricRow, StageRate};

use crate::scenario::fixture::STAGE_IDS;

/// Rounds half away from zero to two decimals.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// Rounds half away from zero to one decimal.
pub fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("score {0} is outside [0, 100]")]
    OutOfRange(f64),
    #[error("cohort is empty")]
    EmptyCohort,
    #[error("correct count {correct} exceeds cohort size {size}")]
    CountExceedsSize { correct: usize, size: usize },
    #[error("report for `{student}` has no `{stage}` entry")]
    MissingStage { student: String, stage: String },
}

/// One of the five score bands 0–20, 21–40, 41–60, 61–80, 81–100.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct ScoreBand(u8);

impl ScoreBand {
    pub const ALL: [ScoreBand; 5] = [ScoreBand(0), ScoreBand(1), ScoreBand(2), ScoreBand(3), ScoreBand(4)];
    const LABELS: [&'static str; 5] = ["0-20", "21-40", "41-60", "61-80", "81-100"];

    pub fn index(self) -> usize {
        usize::from(self.0)
    }

    /// Inclusive lower bound.
    pub fn lower(self) -> u32 {
        if self.0 == 0 {
            0
        } else {
            20 * u32::from(self.0) + 1
        }
    }

    /// Inclusive upper bound.
    pub fn upper(self) -> u32 {
        20 * (u32::from(self.0) + 1)
    }

    pub fn label(self) -> &'static str {
        Self::LABELS[self.index()]
    }

    fn of_integer(score: u32) -> Self {
        Self(if score <= 20 { 0 } else { ((score - 1) / 20) as u8 })
    }
}

impl fmt::Display for ScoreBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl From<ScoreBand> for String {
    fn from(b: ScoreBand) -> Self {
        b.label().to_owned()
    }
}

impl TryFrom<String> for ScoreBand {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::ALL.into_iter().find(|b| b.label() == s).ok_or_else(|| format!("unknown band `{s}`"))
    }
}

/// Band of `score` after rounding half up to an integer.
pub fn band_of(score: f64) -> Result<ScoreBand, AnalyticsError> {
    if !(0.0..=100.0).contains(&score) {
        return Err(AnalyticsError::OutOfRange(score));
    }
    Ok(ScoreBand::of_integer((score + 0.5).floor() as u32))
}

/// Share of a cohort in each band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandDistribution {
    pub counts: [usize; 5],
    /// Percentages in band order, two decimals.
    pub percent: [f64; 5],
}

impl BandDistribution {
    pub fn get(&self, band: ScoreBand) -> f64 {
        self.percent[band.index()]
    }

    pub fn as_map(&self) -> BTreeMap<ScoreBand, f64> {
        ScoreBand::ALL.into_iter().map(|b| (b, self.get(b))).collect()
    }
}

pub fn band_distribution(scores: &[f64]) -> Result<BandDistribution, AnalyticsError> {
    if scores.is_empty() {
        return Err(AnalyticsError::EmptyCohort);
    }
    let mut counts = [0usize; 5];
    for &s in scores {
        counts[band_of(s)?.index()] += 1;
    }
    let n = scores.len() as f64;
    let percent = counts.map(|c| round2(100.0 * c as f64 / n));
    Ok(BandDistribution { counts, percent })
}

/// `100 · correct / size`, two decimals.
pub fn correctness_rate(correct: usize, size: usize) -> Result<f64, AnalyticsError> {
    if size == 0 {
        return Err(AnalyticsError::EmptyCohort);
    }
    if correct > size {
        return Err(AnalyticsError::CountExceedsSize { correct, size });
    }
    Ok(round2(100.0 * correct as f64 / size as f64))
}

/// Per-stage correctness over S1..S7.
pub fn stage_correctness_table<'a, I>(cohort: I) -> Result<Vec<StageRate>, AnalyticsError>
where
    I: IntoIterator<Item = (&'a str, &'a BTreeMap<String, bool>)>,
{
    stage_correctness_table_for(&STAGE_IDS, cohort)
}

/// Per-stage correctness over the given stages, in the given order. Each
/// item is a student id and that student's stage → correct map.
pub fn stage_correctness_table_for<'a, I>(stages: &[&str], cohort: I) -> Result<Vec<StageRate>, AnalyticsError>
where
    I: IntoIterator<Item = (&'a str, &'a BTreeMap<String, bool>)>,
{
    let mut correct = vec![0usize; stages.len()];
    let mut size = 0;
    for (student, map) in cohort {
        size += 1;
        for (i, stage) in stages.iter().enumerate() {
            let ok = map.get(*stage).ok_or_else(|| AnalyticsError::MissingStage {
                student: student.to_owned(),
                stage: (*stage).to_owned(),
            })?;
            correct[i] += usize::from(*ok);
        }
    }
    stages
        .iter()
        .zip(correct)
        .map(|(stage, k)| {
            Ok(StageRate { stage: (*stage).to_owned(), correct: k, size, rate: correctness_rate(k, size)? })
        })
        .collect()
}

/// The three efficiency questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RubricDimension {
    Q1,
    Q2,
    Q3,
}

impl RubricDimension {
    pub const ALL: [RubricDimension; 3] = [Self::Q1, Self::Q2, Self::Q3];

    pub fn description(self) -> &'static str {
        match self {
            Self::Q1 => "proficiency in disassembling and assembling the engine",
            Self::Q2 => "motivation to learn engine disassembly and assembly",
            Self::Q3 => "proficiency in using tools",
        }
    }
}
