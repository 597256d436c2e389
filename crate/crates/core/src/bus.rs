// SPDX-License-Identifier: Apache-2.0

//! In-process publish/subscribe.
//!
//! A message is an action type plus the object it concerns. Publishers do
//! not know who listens; subscribers filter by action type. Delivery is
//! synchronous and strictly ordered: a handler that publishes while handling
//! a message only queues the new one, and it is delivered after the current
//! message has reached every subscriber.
//!
//! Every accepted message is appended to an append-only log with gapless
//! sequence numbers starting at 1. The log doubles as the session
//! recording.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionType {
    StepStarted,
    ActionPerformed,
    StepCompleted,
    StepFailed,
    HintIssued,
    ProgressUpdated,
    SessionFinished,
}

impl ActionType {
    pub const ALL: [ActionType; 7] = [
        Self::StepStarted,
        Self::ActionPerformed,
        Self::StepCompleted,
        Self::StepFailed,
        Self::HintIssued,
        Self::ProgressUpdated,
        Self::SessionFinished,
    ];
}

/// Payload value. Payloads are flat: no nested records or lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
}

impl Scalar {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Self::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Self::Float(x) => Some(*x),
            Self::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Self::Int(i) => Some(*i),
            _ => None,
        }
    }
}

impl From<&str> for Scalar {
    fn from(s: &str) -> Self {
        Self::Str(s.to_owned())
    }
}

impl From<String> for Scalar {
    fn from(s: String) -> Self {
        Self::Str(s)
    }
}

impl From<f64> for Scalar {
    fn from(x: f64) -> Self {
        Self::Float(x)
    }
}

impl From<i64> for Scalar {
    fn from(i: i64) -> Self {
        Self::Int(i)
    }
}

impl From<usize> for Scalar {
    fn from(i: usize) -> Self {
        Self::Int(i as i64)
    }
}

impl From<bool> for Scalar {
    fn from(b: bool) -> Self {
        Self::Bool(b)
    }
}

pub type Payload = BTreeMap<String, Scalar>;

/// A logged message. Field order is the on-disk order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMessage {
    pub seq: u64,
    /// Milliseconds since session start.
    pub t_ms: u64,
    pub action: ActionType,
    pub target: String,
    #[serde(default)]
    pub payload: Payload,
}

impl EventMessage {
    pub fn get(&self, key: &str) -> Option<&Scalar> {
        self.payload.get(key)
    }
}

/// A message before the bus has numbered it.
#[derive(Debug, Clone, PartialEq)]
pub struct EventDraft {
    pub t_ms: u64,
    pub action: ActionType,
    pub target: String,
    pub payload: Payload,
}

impl EventDraft {
    pub fn new(action: ActionType, target: impl Into<String>) -> Self {
        Self { t_ms: 0, action, target: target.into(), payload: Payload::new() }
    }

    pub fn at(mut self, t_ms: u64) -> Self {
        self.t_ms = t_ms;
        self
    }

    pub fn with(mut self, key: &str, value: impl Into<Scalar>) -> Self {
        self.payload.insert(key.to_owned(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BusError {
    #[error("bus is closed")]
    Closed,
    #[error("message target is empty")]
    EmptyTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SubscriptionId(u64);

impl fmt::Display for SubscriptionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "sub-{}", self.0)
    }
}

/// Handed to a handler so it can publish follow-up messages. They are
/// queued, never delivered re-entrantly.
#[derive(Debug, Default)]
pub struct Outbox {
    queued: Vec<EventDraft>,
}

impl Outbox {
    pub fn publish(&mut self, draft: EventDraft) -> Result<(), BusError> {
        if draft.target.is_empty() {
            return Err(BusError::EmptyTarget);
        }
        self.queued.push(draft);
        Ok(())
    }
}

type Handler = Box<dyn FnMut(&EventMessage, &mut Outbox) + Send>;

struct Subscriber {
    id: SubscriptionId,
    filter: BTreeSet<ActionType>,
    handler: Handler,
}

impl Subscriber {
    fn wants(&self, action: ActionType) -> bool {
        self.filter.is_empty() || self.filter.contains(&action)
    }
}

/// Result of a publish.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Published {
    pub seq: u64,
    /// Handlers invoked for this message (not counting queued follow-ups).
    pub delivered: usize,
}

#[derive(Default)]
pub struct EventBus {
    log: Vec<EventMessage>,
    subscribers: Vec<Subscriber>,
    next_subscription: u64,
    closed: bool,
}

impl fmt::Debug for EventBus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventBus")
            .field("logged", &self.log.len())
            .field("subscribers", &self.subscribers.len())
            .field("closed", &self.closed)
            .finish()
    }
}

impl EventBus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers `handler` for messages whose action type is in `filter`; an
    /// empty filter matches everything.
    pub fn subscribe<F>(
        &mut self,
        filter: impl IntoIterator<Item = ActionType>,
        handler: F,
    ) -> Result<SubscriptionId, BusError>
    where
        F: FnMut(&EventMessage, &mut Outbox) + Send + 'static,
    {
        if self.closed {
            return Err(BusError::Closed);
        }
        self.next_subscription += 1;
        let id = SubscriptionId(self.next_subscription);
        self.subscribers.push(Subscriber { id, filter: filter.into_iter().collect(), handler: Box::new(handler) });
        Ok(id)
    }

    pub fn unsubscribe(&mut self, id: SubscriptionId) -> bool {
        let before = self.subscribers.len();
        self.subscribers.retain(|s| s.id != id);
        self.subscribers.len() != before
    }

    pub fn publish(&mut self, draft: EventDraft) -> Result<Published, BusError> {
        if self.closed {
            return Err(BusError::Closed);
        }
        if draft.target.is_empty() {
            return Err(BusError::EmptyTarget);
        }
        let first = self.append(draft);
        let mut queue = VecDeque::from([first]);
        let mut delivered_first = 0;
        while let Some(idx) = queue.pop_front() {
            let message = self.log[idx].clone();
            let mut outbox = Outbox::default();
            let mut delivered = 0;
            for sub in self.subscribers.iter_mut().filter(|s| s.wants(message.action)) {
                (sub.handler)(&message, &mut outbox);
                delivered += 1;
                for follow_up in outbox.queued.drain(..) {
                    let seq_idx = self.log.len();
                    self.log.push(EventMessage {
                        seq: seq_idx as u64 + 1,
                        t_ms: follow_up.t_ms,
                        action: follow_up.action,
                        target: follow_up.target,
                        payload: follow_up.payload,
                    });
                    queue.push_back(seq_idx);
                }
            }
            if idx == first {
                delivered_first = delivered;
            }
        }
        Ok(Published { seq: self.log[first].seq, delivered: delivered_first })
    }

    fn append(&mut self, draft: EventDraft) -> usize {
        let idx = self.log.len();
        self.log.push(EventMessage {
            seq: idx as u64 + 1,
            t_ms: draft.t_ms,
            action: draft.action,
            target: draft.target,
            payload: draft.payload,
        });
        idx
    }

    /// Every message so far, in sequence order.
    pub fn log(&self) -> &[EventMessage] {
        &self.log
    }

    /// Copy of the log. The log itself is never truncated.
    pub fn drain_log(&self) -> Vec<EventMessage> {
        self.log.clone()
    }

    pub fn close(&mut self) {
        self.closed = true;
        self.subscribers.clear();
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }
}

/// Writes events as newline-delimited JSON.
pub fn write_ndjson<W: Write>(events: &[EventMessage], mut out: W) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_ndjson(events: &[EventMessage]) -> String {
    let mut buf = Vec::new();
    write_ndjson(events, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

#[derive(Debug, thiserror::Error)]
#[error("event log line {line}: {message}")]
pub struct LogParseError {
    pub line: usize,
    pub message: String,
}

/// Reads newline-delimited JSON events. Blank lines are skipped.
pub fn read_ndjson<R: BufRead>(input: R) -> Result<Vec<EventMessage>, LogParseError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| LogParseError { line: i + 1, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| LogParseError { line: i + 1, message: e.to_string() })?);
    }
    Ok(out)
}
