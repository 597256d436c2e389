// SPDX-License-Identifier: Apache-2.0

//! Rendering-agnostic engine for guided assembly and disassembly training.
//!
//! The crate is layered the same way a training application is:
//!
//! - [`scenario`]: the replaceable entity layer (parts, tools, actions,
//!   procedure steps) and its JSON file format.
//! - [`bus`]: the event-message layer that decouples notifications from
//!   state updates.
//! - [`session`]: the training/examination state machine, scoring and
//!   deterministic replay.
//! - [`analytics`]: cohort score bands and per-stage correctness rates.
//! - [`perf`]: frame pacing, draw-call batching and before/after ratio
//!   reports.
//! - [`store`]: crash-safe, replay-verified storage of session records.

pub mod analytics;
pub mod bus;
pub mod canonical;
pub mod perf;
pub mod scenario;
pub mod session;
pub mod store;

pub use store::{Store, StoreConfig, StoreError, StoredSession};

pub use analytics::{band_distribution, band_of, correctness_rate, stage_correctness_table, ScoreBand};
pub use bus::{ActionType, EventBus, EventMessage, Scalar};
pub use scenario::{
    invert_scenario, parse_scenario, serialize_scenario, topological_order, validate_scenario, Action, BasicAction,
    CompositeAction, Direction, Part, Scenario, Step, Tool,
};
pub use session::{
    replay, Attempt, AttemptOutcome, ErrorKind, HintConfig, Mode, ScoreReport, ScoringRules, Session, SessionRecord,
};
