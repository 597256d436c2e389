// SPDX-License-Identifier: Apache-2.0

//! Session records and replay.
//!
//! A record is the header a session was started with, its complete event
//! log, and the score report. Replaying re-applies every logged attempt to a
//! fresh session and must reproduce the log and the report exactly.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{Attempt, HintConfig, Mode, ScoreReport, ScoringRules, Session, SessionError};
use crate::bus::{ActionType, EventMessage, Scalar};
use crate::canonical;
use crate::scenario::Scenario;

pub const RECORD_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub format: u32,
    pub session_id: String,
    pub scenario_id: String,
    pub mode: Mode,
    pub hints: HintConfig,
    pub rules: ScoringRules,
    /// SHA-256 of the canonical rules.
    pub rules_digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub student_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub header: RecordHeader,
    pub events: Vec<EventMessage>,
    pub report: ScoreReport,
}

impl SessionRecord {
    pub fn from_session(
        session: &Session,
        student_id: Option<String>,
        group: Option<String>,
    ) -> Result<Self, SessionError> {
        let report = session.score_report()?;
        let rules = session.rules().clone();
        Ok(Self {
            header: RecordHeader {
                format: RECORD_FORMAT,
                session_id: session.id().to_owned(),
                scenario_id: session.scenario().id.clone(),
                mode: session.mode(),
                hints: session.requested_hints(),
                rules_digest: canonical::digest(&rules).expect("rules serialize"),
                rules,
                student_id,
                group,
            },
            events: session.events().to_vec(),
            report,
        })
    }

    pub fn parse(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_canonical_string(&self) -> String {
        canonical::to_string(self).expect("records serialize")
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplayError {
    #[error("corrupt event log: {0}")]
    Corruption(String),
    #[error("record is for scenario `{record}`, not `{given}`")]
    ScenarioMismatch { record: String, given: String },
    #[error("rules digest does not match the embedded rules")]
    DigestMismatch,
    #[error(transparent)]
    Session(#[from] SessionError),
}

fn corrupt(msg: impl Into<String>) -> ReplayError {
    ReplayError::Corruption(msg.into())
}

/// Rebuilds a session's score from its event log alone.
///
/// The session id is taken from the final `SessionFinished` event. Hint
/// events are not regenerated (the hint configuration is not part of the
/// input), but every other event must match the log exactly.
pub fn replay(
    scenario: &Scenario,
    mode: Mode,
    rules: &ScoringRules,
    events: &[EventMessage],
) -> Result<ScoreReport, ReplayError> {
    let finished = events.last().filter(|e| e.action == ActionType::SessionFinished);
    let session_id = finished.ok_or_else(|| corrupt("log does not end with SessionFinished"))?.target.clone();
    let session = rebuild(scenario, session_id, mode, HintConfig::NONE, rules, events)?;

    let strip = |evs: &[EventMessage]| -> Vec<(u64, ActionType, String, crate::bus::Payload)> {
        evs.iter()
            .filter(|e| e.action != ActionType::HintIssued)
            .map(|e| (e.t_ms, e.action, e.target.clone(), e.payload.clone()))
            .collect()
    };
    let (expected, actual) = (strip(events), strip(session.events()));
    if let Some(i) = (0..expected.len().max(actual.len())).find(|&i| expected.get(i) != actual.get(i)) {
        return Err(corrupt(format!("non-hint event {} does not match the replayed session", i + 1)));
    }
    Ok(session.score_report()?)
}

/// Replays a full record. The regenerated log must equal the recorded one
/// byte for byte, hints included. The caller compares the returned report
/// with `record.report`.
pub fn replay_record(scenario: &Scenario, record: &SessionRecord) -> Result<ScoreReport, ReplayError> {
    let h = &record.header;
    if h.scenario_id != scenario.id {
        return Err(ReplayError::ScenarioMismatch { record: h.scenario_id.clone(), given: scenario.id.clone() });
    }
    if canonical::digest(&h.rules).expect("rules serialize") != h.rules_digest {
        return Err(ReplayError::DigestMismatch);
    }
    let session = rebuild(scenario, h.session_id.clone(), h.mode, h.hints, &h.rules, &record.events)?;
    if session.events().len() != record.events.len() {
        return Err(corrupt(format!(
            "replay produced {} events, record has {}",
            session.events().len(),
            record.events.len()
        )));
    }
    if let Some((a, _)) = session.events().iter().zip(&record.events).find(|(a, b)| a != b) {
        return Err(corrupt(format!("event {} does not match the replayed session", a.seq)));
    }
    Ok(session.score_report()?)
}

fn rebuild(
    scenario: &Scenario,
    session_id: String,
    mode: Mode,
    hints: HintConfig,
    rules: &ScoringRules,
    events: &[EventMessage],
) -> Result<Session, ReplayError> {
    for (i, e) in events.iter().enumerate() {
        if e.seq != i as u64 + 1 {
            return Err(corrupt(format!("sequence gap: expected {}, found {}", i + 1, e.seq)));
        }
    }
    if mode == Mode::Examination && events.iter().any(|e| e.action == ActionType::HintIssued) {
        return Err(corrupt("examination log contains hints"));
    }

    let mut session = Session::start(session_id, Arc::new(scenario.clone()), mode, hints, rules.clone())?;
    for e in events {
        match e.action {
            ActionType::ActionPerformed => {
                if scenario.step(&e.target).is_none() {
                    return Err(corrupt(format!("event {}: unknown step `{}`", e.seq, e.target)));
                }
                let attempt = Attempt::from_event(e).map_err(corrupt)?;
                session.attempt(&attempt).map_err(|err| match err {
                    SessionError::Finished => corrupt(format!("event {}: attempt after the session finished", e.seq)),
                    other => other.into(),
                })?;
            }
            ActionType::SessionFinished
                if e.get("reason") == Some(&Scalar::from("abandoned")) && !session.is_finished() =>
            {
                session.abandon(e.t_ms)?;
            }
            _ => {}
        }
    }
    if !session.is_finished() {
        return Err(corrupt("log ends before the session finished"));
    }
    Ok(session)
}
