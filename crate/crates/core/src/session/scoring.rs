// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ErrorKind, Mode, Session, SessionError, Status};
use crate::analytics::{band_of, round2};
use crate::scenario::Scenario;

/// Teacher-defined scoring rules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoringRules {
    /// Points for completing each step. Steps not listed earn nothing.
    pub points_per_step: BTreeMap<String, f64>,
    /// Points taken off per logged error, on the same scale as the step
    /// points.
    pub deduction_per_error: BTreeMap<ErrorKind, f64>,
    pub floor_at_zero: bool,
}

impl ScoringRules {
    /// Equal points per step summing to 100; 5 off for order, tool and
    /// torque errors, 3 for a wrong action, 2 for touching the wrong part.
    pub fn default_for(scenario: &Scenario) -> Self {
        let n = scenario.steps.len();
        let each = if n == 0 { 0.0 } else { 100.0 / n as f64 };
        Self {
            points_per_step: scenario.steps.iter().map(|s| (s.id.clone(), each)).collect(),
            deduction_per_error: BTreeMap::from([
                (ErrorKind::WrongOrder, 5.0),
                (ErrorKind::WrongTool, 5.0),
                (ErrorKind::WrongTorque, 5.0),
                (ErrorKind::WrongAction, 3.0),
                (ErrorKind::UnknownTarget, 2.0),
            ]),
            floor_at_zero: true,
        }
    }

    /// Sum of step points in authored step order.
    pub fn points_possible(&self, scenario: &Scenario) -> f64 {
        scenario.steps.iter().map(|s| self.points(&s.id)).sum()
    }

    pub fn points(&self, step: &str) -> f64 {
        self.points_per_step.get(step).copied().unwrap_or(0.0)
    }

    pub fn deduction(&self, kind: ErrorKind) -> f64 {
        self.deduction_per_error.get(&kind).copied().unwrap_or(0.0)
    }

    pub fn check(&self, scenario: &Scenario) -> Result<(), String> {
        for (step, &p) in &self.points_per_step {
            if scenario.step(step).is_none() {
                return Err(format!("points for unknown step `{step}`"));
            }
            if !(p.is_finite() && p >= 0.0) {
                return Err(format!("points for `{step}` must be non-negative, got {p}"));
            }
        }
        for (kind, &d) in &self.deduction_per_error {
            if !(d.is_finite() && d >= 0.0) {
                return Err(format!("deduction for {kind} must be non-negative, got {d}"));
            }
        }
        if !scenario.steps.is_empty() && self.points_possible(scenario) <= 0.0 {
            return Err("total achievable points must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Completed,
    Abandoned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub step: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    pub completed: bool,
    pub errors: usize,
}

/// Efficiency rubric, 0–100 per dimension. Q1 (procedure proficiency) and
/// Q3 (tool proficiency) come from the session; Q2 (motivation) is entered
/// by a supervisor and is never computed here.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Rubric {
    pub q1: Option<f64>,
    pub q2: Option<f64>,
    pub q3: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub session_id: String,
    pub scenario_id: String,
    pub mode: Mode,
    pub outcome: Outcome,
    /// 0–100, two decimals.
    pub score: f64,
    pub band: String,
    pub completed_steps: usize,
    pub total_steps: usize,
    pub points_earned: f64,
    pub points_possible: f64,
    pub points_deducted: f64,
    pub errors: BTreeMap<ErrorKind, usize>,
    pub steps: Vec<StepResult>,
    /// Stage id → completed with zero errors on any of its steps.
    pub stages: BTreeMap<String, bool>,
    pub rubric: Rubric,
}

/// Scores a finished session.
///
/// `score = 100 · (earned − deducted) / possible`, clamped to `[0, 100]`
/// when the rules floor at zero, and rounded to two decimals. A scenario
/// with no steps scores 100.
pub fn finish_and_score(session: &Session, rules: &ScoringRules) -> Result<ScoreReport, SessionError> {
    let outcome = match session.status() {
        Status::Active => return Err(SessionError::NotFinished),
        Status::Completed => Outcome::Completed,
        Status::Abandoned => Outcome::Abandoned,
    };
    let scenario = session.scenario();
    let completed = session.completed_steps();

    let mut errors_per_step: BTreeMap<&str, usize> = BTreeMap::new();
    let mut errors: BTreeMap<ErrorKind, usize> = BTreeMap::new();
    let mut tool_errors: BTreeMap<&str, usize> = BTreeMap::new();
    for e in session.error_log() {
        *errors_per_step.entry(e.step.as_str()).or_default() += 1;
        *errors.entry(e.kind).or_default() += 1;
        if matches!(e.kind, ErrorKind::WrongTool | ErrorKind::WrongTorque) {
            *tool_errors.entry(e.step.as_str()).or_default() += 1;
        }
    }

    let possible = rules.points_possible(scenario);
    let earned: f64 = scenario.steps.iter().filter(|s| completed.contains(&s.id)).map(|s| rules.points(&s.id)).sum();
    let deducted: f64 = session.error_log().iter().map(|e| rules.deduction(e.kind)).sum();

    let raw = if possible > 0.0 { 100.0 * (earned - deducted) / possible } else { 100.0 - deducted };
    let mut score = raw.min(100.0);
    if rules.floor_at_zero {
        score = score.max(0.0);
    }
    let score = round2(score);

    let steps: Vec<StepResult> = scenario
        .steps
        .iter()
        .map(|s| StepResult {
            step: s.id.clone(),
            stage: s.stage.clone(),
            completed: completed.contains(&s.id),
            errors: errors_per_step.get(s.id.as_str()).copied().unwrap_or(0),
        })
        .collect();

    let stages = scenario
        .stages
        .iter()
        .map(|st| {
            let ok = steps
                .iter()
                .filter(|r| r.stage.as_deref() == Some(st.id.as_str()))
                .all(|r| r.completed && r.errors == 0);
            (st.id.clone(), ok)
        })
        .collect();

    let total = scenario.steps.len();
    let clean = steps.iter().filter(|r| r.completed && r.errors == 0).count();
    let tool_steps: Vec<_> = scenario.steps.iter().filter(|s| s.required_tool.is_some()).collect();
    let rubric = Rubric {
        q1: (total > 0).then(|| round2(100.0 * clean as f64 / total as f64)),
        q2: None,
        q3: (!tool_steps.is_empty()).then(|| {
            let ok = tool_steps
                .iter()
                .filter(|s| completed.contains(&s.id) && !tool_errors.contains_key(s.id.as_str()))
                .count();
            round2(100.0 * ok as f64 / tool_steps.len() as f64)
        }),
    };

    Ok(ScoreReport {
        session_id: session.id().to_owned(),
        scenario_id: scenario.id.clone(),
        mode: session.mode(),
        outcome,
        score,
        band: band_of(score.clamp(0.0, 100.0)).expect("clamped into range").label().to_owned(),
        completed_steps: completed.len(),
        total_steps: total,
        points_earned: earned,
        points_possible: possible,
        points_deducted: deducted,
        errors,
        steps,
        stages,
        rubric,
    })
}
