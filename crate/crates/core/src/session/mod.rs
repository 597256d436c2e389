// SPDX-License-Identifier: Apache-2.0

//! Control layer: one trainee session in training or examination mode.
//!
//! Both modes run the exact same validation. The only difference is that
//! training emits hints (per enabled channel) for the next step and
//! examination emits none.
//!
//! All state transitions are pure functions of the previous state and the
//! attempt, including its timestamp, so the event log alone is enough to
//! rebuild a session (see [`replay`]).

mod record;
mod scoring;
mod script;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bus::{ActionType, EventBus, EventDraft, EventMessage, Scalar};
use crate::scenario::{validate_scenario, Action, Direction, PartState, Scenario, ScenarioError, Step};

pub use record::{replay, replay_record, RecordHeader, ReplayError, SessionRecord, RECORD_FORMAT};
pub use scoring::{finish_and_score, Outcome, Rubric, ScoreReport, ScoringRules, StepResult};
pub use script::scripted_run;

/// Torque within this many N·m of the requirement is accepted.
pub const TORQUE_TOLERANCE_NM: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Training,
    #[serde(alias = "exam")]
    Examination,
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "training" | "train" => Ok(Self::Training),
            "examination" | "exam" => Ok(Self::Examination),
            _ => Err(format!("unknown mode `{s}` (expected training or exam)")),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Training => "training",
            Self::Examination => "examination",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HintChannel {
    Voice,
    Text,
    Tablet,
    Screen,
}

impl HintChannel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Voice => "voice",
            Self::Text => "text",
            Self::Tablet => "tablet",
            Self::Screen => "screen",
        }
    }
}

/// Which hint channels are on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct HintConfig {
    pub voice: bool,
    pub text: bool,
    pub tablet_display: bool,
    pub screen_display: bool,
}

impl HintConfig {
    pub const NONE: Self = Self { voice: false, text: false, tablet_display: false, screen_display: false };
    /// Voice prompts only.
    pub const T1: Self = Self { voice: true, ..Self::NONE };
    /// Voice, text and the tablet operation display.
    pub const T2: Self = Self { voice: true, text: true, tablet_display: true, screen_display: false };
    /// Everything, including the big-screen operation display.
    pub const T3: Self = Self { voice: true, text: true, tablet_display: true, screen_display: true };

    pub fn channels(self) -> impl Iterator<Item = HintChannel> {
        [
            (self.voice, HintChannel::Voice),
            (self.text, HintChannel::Text),
            (self.tablet_display, HintChannel::Tablet),
            (self.screen_display, HintChannel::Screen),
        ]
        .into_iter()
        .filter_map(|(on, ch)| on.then_some(ch))
    }
}

impl FromStr for HintConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "T1" => Ok(Self::T1),
            "T2" => Ok(Self::T2),
            "T3" => Ok(Self::T3),
            "NONE" => Ok(Self::NONE),
            _ => Err(format!("unknown hint preset `{s}` (expected T1, T2 or T3)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    WrongOrder,
    WrongTool,
    WrongTorque,
    WrongAction,
    UnknownTarget,
}

impl ErrorKind {
    pub const ALL: [ErrorKind; 5] =
        [Self::WrongOrder, Self::WrongTool, Self::WrongTorque, Self::WrongAction, Self::UnknownTarget];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::WrongOrder => "wrong-order",
            Self::WrongTool => "wrong-tool",
            Self::WrongTorque => "wrong-torque",
            Self::WrongAction => "wrong-action",
            Self::UnknownTarget => "unknown-target",
        }
    }
}

impl FromStr for ErrorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or_else(|| format!("unknown error kind `{s}`"))
    }
}

impl fmt::Display for ErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One trainee interaction, as delivered by the interaction layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub step: String,
    /// Tool picked up for this attempt. `None` keeps the tool in hand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool: Option<String>,
    /// Torque dialled in, N·m. `None` uses the held tool's setting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torque: Option<f64>,
    pub action: Action,
    /// Part the trainee actually acted on, when the interaction layer knows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub part: Option<String>,
    /// Milliseconds since session start.
    #[serde(default)]
    pub t_ms: u64,
}

impl Attempt {
    pub fn new(step: impl Into<String>, action: impl Into<Action>) -> Self {
        Self { step: step.into(), tool: None, torque: None, action: action.into(), part: None, t_ms: 0 }
    }

    /// The attempt exactly as the step requires it.
    pub fn correct_for(step: &Step) -> Self {
        Self {
            step: step.id.clone(),
            tool: step.required_tool.clone(),
            torque: step.required_torque,
            action: step.action.clone(),
            part: Some(step.target_part.clone()),
            t_ms: 0,
        }
    }

    pub fn with_tool(mut self, tool: impl Into<String>) -> Self {
        self.tool = Some(tool.into());
        self
    }

    pub fn with_torque(mut self, torque: f64) -> Self {
        self.torque = Some(torque);
        self
    }

    pub fn on_part(mut self, part: impl Into<String>) -> Self {
        self.part = Some(part.into());
        self
    }

    pub fn at(mut self, t_ms: u64) -> Self {
        self.t_ms = t_ms;
        self
    }

    fn to_draft(&self) -> EventDraft {
        let mut d = EventDraft::new(ActionType::ActionPerformed, self.step.clone())
            .at(self.t_ms)
            .with("action", self.action.to_string());
        if let Some(tool) = &self.tool {
            d = d.with("tool", tool.as_str());
        }
        if let Some(torque) = self.torque {
            d = d.with("torque", torque);
        }
        if let Some(part) = &self.part {
            d = d.with("part", part.as_str());
        }
        d
    }

    /// Rebuilds an attempt from its `ActionPerformed` event.
    pub fn from_event(e: &EventMessage) -> Result<Self, String> {
        if e.action != ActionType::ActionPerformed {
            return Err(format!("event {} is not ActionPerformed", e.seq));
        }
        let text = |k: &str| -> Result<Option<String>, String> {
            match e.get(k) {
                None => Ok(None),
                Some(Scalar::Str(s)) => Ok(Some(s.clone())),
                Some(other) => Err(format!("event {}: `{k}` is not a string: {other:?}", e.seq)),
            }
        };
        let action = text("action")?
            .ok_or_else(|| format!("event {}: missing action", e.seq))?
            .parse()
            .map_err(|err| format!("event {}: {err}", e.seq))?;
        let torque = match e.get("torque") {
            None => None,
            Some(v) => Some(v.as_f64().ok_or_else(|| format!("event {}: torque is not a number", e.seq))?),
        };
        Ok(Self { step: e.target.clone(), tool: text("tool")?, torque, action, part: text("part")?, t_ms: e.t_ms })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttemptOutcome {
    pub accepted: bool,
    pub error: Option<ErrorKind>,
    pub events: Vec<EventMessage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeldTool {
    pub tool: String,
    pub torque: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEntry {
    pub step: String,
    pub kind: ErrorKind,
    pub t_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Active,
    Completed,
    Abandoned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageProgress {
    pub stage: String,
    pub completed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub completed: usize,
    pub total: usize,
    pub fraction: f64,
    pub stages: Vec<StageProgress>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SessionError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(#[from] ScenarioError),
    #[error("invalid scoring rules: {0}")]
    InvalidRules(String),
    #[error("unknown step `{0}`")]
    UnknownStep(String),
    #[error("session is already finished")]
    Finished,
    #[error("session is not finished")]
    NotFinished,
}

pub struct Session {
    id: String,
    scenario: Arc<Scenario>,
    mode: Mode,
    requested_hints: HintConfig,
    rules: ScoringRules,
    step_index: HashMap<String, usize>,
    completed: BTreeSet<String>,
    completion_order: Vec<String>,
    candidates: Vec<String>,
    started: BTreeSet<String>,
    held_tool: Option<HeldTool>,
    part_states: BTreeMap<String, PartState>,
    error_log: Vec<ErrorEntry>,
    clock: u64,
    status: Status,
    bus: EventBus,
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("id", &self.id)
            .field("scenario", &self.scenario.id)
            .field("mode", &self.mode)
            .field("status", &self.status)
            .field("completed", &self.completed.len())
            .field("errors", &self.error_log.len())
            .finish()
    }
}

impl Session {
    /// Starts a session. Examination mode ignores `hints`.
    pub fn start(
        id: impl Into<String>,
        scenario: impl Into<Arc<Scenario>>,
        mode: Mode,
        hints: HintConfig,
        rules: ScoringRules,
    ) -> Result<Self, SessionError> {
        let scenario = scenario.into();
        if let Some(d) = validate_scenario(&scenario).into_iter().min_by_key(|d| d.code.parse_priority()) {
            return Err(d.into_error().into());
        }
        rules.check(&scenario).map_err(SessionError::InvalidRules)?;

        let mut session = Self {
            id: id.into(),
            step_index: scenario.steps.iter().enumerate().map(|(i, s)| (s.id.clone(), i)).collect(),
            part_states: scenario.parts.iter().map(|p| (p.id.clone(), p.initial_state)).collect(),
            scenario,
            mode,
            requested_hints: hints,
            rules,
            completed: BTreeSet::new(),
            completion_order: Vec::new(),
            candidates: Vec::new(),
            started: BTreeSet::new(),
            held_tool: None,
            error_log: Vec::new(),
            clock: 0,
            status: Status::Active,
            bus: EventBus::new(),
        };
        session.candidates = session.compute_candidates();
        if session.scenario.steps.is_empty() {
            session.finish(Status::Completed, "completed");
        } else {
            session.issue_hints();
        }
        Ok(session)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Channels actually in use: none in examination mode.
    pub fn hints(&self) -> HintConfig {
        match self.mode {
            Mode::Training => self.requested_hints,
            Mode::Examination => HintConfig::NONE,
        }
    }

    pub fn requested_hints(&self) -> HintConfig {
        self.requested_hints
    }

    pub fn rules(&self) -> &ScoringRules {
        &self.rules
    }

    pub fn status(&self) -> Status {
        self.status
    }

    pub fn is_finished(&self) -> bool {
        self.status != Status::Active
    }

    pub fn completed_steps(&self) -> &BTreeSet<String> {
        &self.completed
    }

    /// Steps in the order they were completed.
    pub fn completion_order(&self) -> &[String] {
        &self.completion_order
    }

    /// Steps whose prerequisites are all done, in authored order.
    pub fn candidates(&self) -> &[String] {
        &self.candidates
    }

    pub fn held_tool(&self) -> Option<&HeldTool> {
        self.held_tool.as_ref()
    }

    pub fn part_states(&self) -> &BTreeMap<String, PartState> {
        &self.part_states
    }

    pub fn error_log(&self) -> &[ErrorEntry] {
        &self.error_log
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn events(&self) -> &[EventMessage] {
        self.bus.log()
    }

    /// Observes future events. Observers cannot publish into the session
    /// log.
    pub fn observe<F>(&mut self, filter: impl IntoIterator<Item = ActionType>, mut observer: F)
    where
        F: FnMut(&EventMessage) + Send + 'static,
    {
        self.bus.subscribe(filter, move |m, _| observer(m)).expect("session bus stays open while the session exists");
    }

    pub fn progress(&self) -> Progress {
        let total = self.scenario.steps.len();
        let completed = self.completed.len();
        let fraction = if total == 0 { 1.0 } else { completed as f64 / total as f64 };
        let stages = self
            .scenario
            .stages
            .iter()
            .map(|st| {
                let (mut done, mut all) = (0, 0);
                for step in self.scenario.steps_in_stage(&st.id) {
                    all += 1;
                    done += usize::from(self.completed.contains(&step.id));
                }
                StageProgress { stage: st.id.clone(), completed: done, total: all }
            })
            .collect();
        Progress { completed, total, fraction, stages }
    }

    pub fn attempt(&mut self, attempt: &Attempt) -> Result<AttemptOutcome, SessionError> {
        if self.is_finished() {
            return Err(SessionError::Finished);
        }
        let &idx = self.step_index.get(&attempt.step).ok_or_else(|| SessionError::UnknownStep(attempt.step.clone()))?;
        let scenario = Arc::clone(&self.scenario);
        let step = &scenario.steps[idx];
        let log_start = self.bus.log().len();
        self.clock = self.clock.max(attempt.t_ms);
        let t = self.clock;

        if let Some(tool) = &attempt.tool {
            let torque = attempt.torque.or_else(|| scenario.tool(tool).and_then(|t| t.torque_setting));
            self.held_tool = Some(HeldTool { tool: tool.clone(), torque });
        } else if let (Some(held), Some(torque)) = (self.held_tool.as_mut(), attempt.torque) {
            held.torque = Some(torque);
        }

        let is_candidate = self.candidates.contains(&step.id);
        if is_candidate && self.started.insert(step.id.clone()) {
            self.emit(EventDraft::new(ActionType::StepStarted, step.id.clone()).at(t));
        }
        self.emit(attempt.to_draft());

        let error = self.judge(step, attempt, is_candidate);
        match error {
            Some(kind) => {
                self.error_log.push(ErrorEntry { step: step.id.clone(), kind, t_ms: t });
                self.emit(EventDraft::new(ActionType::StepFailed, step.id.clone()).at(t).with("error", kind.as_str()));
            }
            None => self.accept(step, t),
        }
        Ok(AttemptOutcome { accepted: error.is_none(), error, events: self.bus.log()[log_start..].to_vec() })
    }

    /// Ends the session early.
    pub fn abandon(&mut self, t_ms: u64) -> Result<(), SessionError> {
        if self.is_finished() {
            return Err(SessionError::Finished);
        }
        self.clock = self.clock.max(t_ms);
        self.finish(Status::Abandoned, "abandoned");
        Ok(())
    }

    pub fn score_report(&self) -> Result<ScoreReport, SessionError> {
        finish_and_score(self, &self.rules)
    }

    fn judge(&self, step: &Step, attempt: &Attempt, is_candidate: bool) -> Option<ErrorKind> {
        if !is_candidate {
            return Some(ErrorKind::WrongOrder);
        }
        if attempt.part.as_ref().is_some_and(|p| *p != step.target_part) {
            return Some(ErrorKind::UnknownTarget);
        }
        if let Some(required) = &step.required_tool {
            if self.held_tool.as_ref().map(|h| &h.tool) != Some(required) {
                return Some(ErrorKind::WrongTool);
            }
        }
        if let Some(required) = step.required_torque {
            let applied = self.held_tool.as_ref().and_then(|h| h.torque);
            if !applied.is_some_and(|t| (t - required).abs() <= TORQUE_TOLERANCE_NM) {
                return Some(ErrorKind::WrongTorque);
            }
        }
        if attempt.action != step.action {
            return Some(ErrorKind::WrongAction);
        }
        None
    }

    fn accept(&mut self, step: &Step, t: u64) {
        self.completed.insert(step.id.clone());
        self.completion_order.push(step.id.clone());
        self.update_part(&step.target_part);
        self.candidates = self.compute_candidates();

        let mut done = EventDraft::new(ActionType::StepCompleted, step.id.clone()).at(t);
        if let Some(stage) = &step.stage {
            done = done.with("stage", stage.as_str());
        }
        self.emit(done);
        let total = self.scenario.steps.len();
        self.emit(
            EventDraft::new(ActionType::ProgressUpdated, self.id.clone())
                .at(t)
                .with("completed", self.completed.len())
                .with("total", total),
        );
        if self.completed.len() == total {
            self.finish(Status::Completed, "completed");
        } else {
            self.issue_hints();
        }
    }

    /// A part changes state once every step acting on it is done.
    fn update_part(&mut self, part: &str) {
        let steps: Vec<&Step> = self.scenario.steps.iter().filter(|s| s.target_part == part).collect();
        if !steps.iter().all(|s| self.completed.contains(&s.id)) {
            return;
        }
        let state = match self.scenario.direction {
            Direction::Assembly => PartState::Installed,
            Direction::Disassembly if steps.iter().any(|s| s.action.contains_hide()) => PartState::Hidden,
            Direction::Disassembly => PartState::Removed,
        };
        self.part_states.insert(part.to_owned(), state);
    }

    fn compute_candidates(&self) -> Vec<String> {
        self.scenario
            .steps
            .iter()
            .filter(|s| !self.completed.contains(&s.id) && s.prerequisites.iter().all(|p| self.completed.contains(p)))
            .map(|s| s.id.clone())
            .collect()
    }

    fn issue_hints(&mut self) {
        let Some(next) = self.candidates.first().and_then(|id| self.scenario.step(id)) else {
            return;
        };
        let next = next.clone();
        for channel in self.hints().channels().collect::<Vec<_>>() {
            let text = hint_text(&self.scenario, &next, channel);
            self.emit(
                EventDraft::new(ActionType::HintIssued, next.id.clone())
                    .at(self.clock)
                    .with("channel", channel.as_str())
                    .with("text", text),
            );
        }
    }

    fn finish(&mut self, status: Status, reason: &str) {
        self.status = status;
        self.emit(EventDraft::new(ActionType::SessionFinished, self.id.clone()).at(self.clock).with("reason", reason));
    }

    fn emit(&mut self, draft: EventDraft) {
        self.bus.publish(draft).expect("session bus is open and targets are non-empty");
    }
}

fn hint_text(scenario: &Scenario, step: &Step, channel: HintChannel) -> String {
    match channel {
        HintChannel::Voice if !step.prompt_voice_text.is_empty() => step.prompt_voice_text.clone(),
        HintChannel::Voice | HintChannel::Text => step.prompt_text.clone(),
        HintChannel::Tablet | HintChannel::Screen => {
            let part = scenario.part(&step.target_part).map_or(step.target_part.as_str(), |p| &p.display_name);
            let mut s = format!("{} on {part}", step.action);
            if let Some(tool) = &step.required_tool {
                let name = scenario.tool(tool).map_or(tool.as_str(), |t| &t.display_name);
                s.push_str(&format!(" with {name}"));
            }
            if let Some(torque) = step.required_torque {
                s.push_str(&format!(" at {torque} N·m"));
            }
            s
        }
    }
}
