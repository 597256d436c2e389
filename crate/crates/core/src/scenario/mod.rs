// SPDX-License-Identifier: Apache-2.0

//! Entity layer: parts, tools, procedure steps and the scenario file format.
//!
//! A scenario is plain data. Swapping the engine, the procedure or the
//! tutorial means shipping a different scenario file; nothing in the control
//! layer changes.

mod action;
pub mod fixture;
mod invert;
mod order;
mod validate;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use action::{
    Action, ActionParseError, BasicAction, BasicKind, CompositeAction, InverseLibrary, RotationDirection,
};
pub use invert::{invert_scenario, invert_scenario_with};
pub use order::topological_order;
pub use validate::{lint_scenario, validate_scenario, Diagnostic, DiagnosticCode, Severity};

/// Current scenario file format version.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Assembly,
    Disassembly,
}

impl Direction {
    pub fn reversed(self) -> Self {
        match self {
            Self::Assembly => Self::Disassembly,
            Self::Disassembly => Self::Assembly,
        }
    }
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Assembly => "assembly",
            Self::Disassembly => "disassembly",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartCategory {
    Fastener,
    Component,
    Assembly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartState {
    Installed,
    Removed,
    Hidden,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Part {
    pub id: String,
    pub display_name: String,
    pub category: PartCategory,
    pub initial_state: PartState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tool {
    pub id: String,
    pub display_name: String,
    /// Torque the tool is set to, in N·m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub torque_setting: Option<f64>,
    /// Shelf position in the toolbox.
    pub slot: u32,
}

/// A named group of steps, e.g. `S3` "screws".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub id: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Step {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    pub target_part: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_tool: Option<String>,
    /// Required torque in N·m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_torque: Option<f64>,
    pub action: Action,
    #[serde(default)]
    pub prerequisites: BTreeSet<String>,
    #[serde(default)]
    pub prompt_text: String,
    #[serde(default)]
    pub prompt_voice_text: String,
}

impl Step {
    pub fn new(id: impl Into<String>, target_part: impl Into<String>, action: impl Into<Action>) -> Self {
        Self {
            id: id.into(),
            stage: None,
            target_part: target_part.into(),
            required_tool: None,
            required_torque: None,
            action: action.into(),
            prerequisites: BTreeSet::new(),
            prompt_text: String::new(),
            prompt_voice_text: String::new(),
        }
    }

    pub fn after<I, S>(mut self, prerequisites: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.prerequisites.extend(prerequisites.into_iter().map(Into::into));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TutorialEntry {
    pub title: String,
    pub body: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub format: u32,
    pub id: String,
    pub engine_name: String,
    pub direction: Direction,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stages: Vec<Stage>,
    pub parts: Vec<Part>,
    pub tools: Vec<Tool>,
    pub steps: Vec<Step>,
    pub tutorial: Vec<TutorialEntry>,
}

impl Scenario {
    pub fn new(id: impl Into<String>, engine_name: impl Into<String>, direction: Direction) -> Self {
        Self {
            format: FORMAT_VERSION,
            id: id.into(),
            engine_name: engine_name.into(),
            direction,
            stages: Vec::new(),
            parts: Vec::new(),
            tools: Vec::new(),
            steps: Vec::new(),
            tutorial: Vec::new(),
        }
    }

    pub fn step(&self, id: &str) -> Option<&Step> {
        self.steps.iter().find(|s| s.id == id)
    }

    pub fn step_index(&self, id: &str) -> Option<usize> {
        self.steps.iter().position(|s| s.id == id)
    }

    pub fn part(&self, id: &str) -> Option<&Part> {
        self.parts.iter().find(|p| p.id == id)
    }

    pub fn tool(&self, id: &str) -> Option<&Tool> {
        self.tools.iter().find(|t| t.id == id)
    }

    /// Steps of `stage`, in authored order.
    pub fn steps_in_stage<'a>(&'a self, stage: &'a str) -> impl Iterator<Item = &'a Step> + 'a {
        self.steps.iter().filter(move |s| s.stage.as_deref() == Some(stage))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("schema error: {message}")]
    Schema { message: String },
    #[error("reference error at {location}: unknown id `{id}`")]
    Reference { id: String, location: String },
    #[error("prerequisite cycle through {}", members.join(", "))]
    Cycle { members: Vec<String> },
    #[error("step `{step}`: composite `{composite}` has no registered inverse")]
    MissingInverse { step: String, composite: String },
}

/// Parses and validates a scenario document.
pub fn parse_scenario(document: &str) -> Result<Scenario, ScenarioError> {
    let scenario: Scenario = serde_json::from_str(document).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Syntax | Category::Eof | Category::Io => {
                ScenarioError::Syntax { line: e.line(), column: e.column(), message: e.to_string() }
            }
            Category::Data => ScenarioError::Schema { message: e.to_string() },
        }
    })?;
    match validate_scenario(&scenario).into_iter().min_by_key(|d| d.code.parse_priority()) {
        None => Ok(scenario),
        Some(d) => Err(d.into_error()),
    }
}

/// Canonical serialization: sorted keys, two-space indent, trailing newline.
pub fn serialize_scenario(scenario: &Scenario) -> String {
    crate::canonical::to_string(scenario).expect("scenario values always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "format": 1, "id": "tiny", "engine_name": "demo", "direction": "disassembly",
        "parts": [{"id": "p1", "display_name": "Cover", "category": "component", "initial_state": "installed"}],
        "tools": [],
        "steps": [{"id": "s1", "target_part": "p1", "action": {"basic": {"kind": "hide"}}}],
        "tutorial": []
    }"#;

    #[test]
    fn minimal_document() {
        let s = parse_scenario(MINIMAL).unwrap();
        assert_eq!(s.steps.len(), 1);
        assert_eq!(s.steps[0].action, Action::Basic(BasicAction::Hide));
        assert_eq!(parse_scenario(&serialize_scenario(&s)).unwrap(), s);
    }

    #[test]
    fn dangling_tool_is_reference_error() {
        let doc = MINIMAL.replace(r#""target_part": "p1","#, r#""target_part": "p1", "required_tool": "t99","#);
        match parse_scenario(&doc) {
            Err(ScenarioError::Reference { id, location }) => {
                assert_eq!(id, "t99");
                assert_eq!(location, "steps[0].required_tool");
            }
            other => panic!("expected reference error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_scenario("{\n  \"format\": 1,\n  oops\n}").unwrap_err();
        assert!(matches!(err, ScenarioError::Syntax { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn unknown_action_kind_is_schema_error() {
        let doc = MINIMAL.replace(r#""kind": "hide""#, r#""kind": "twist""#);
        assert!(matches!(parse_scenario(&doc), Err(ScenarioError::Schema { .. })));
    }

    #[test]
    fn missing_field_is_schema_error() {
        let doc = MINIMAL.replace(r#""engine_name": "demo","#, "");
        let err = parse_scenario(&doc).unwrap_err();
        assert!(matches!(&err, ScenarioError::Schema { message } if message.contains("engine_name")), "{err:?}");
    }

    #[test]
    fn unsupported_format_is_schema_error() {
        let doc = MINIMAL.replace(r#""format": 1"#, r#""format": 2"#);
        assert!(matches!(parse_scenario(&doc), Err(ScenarioError::Schema { .. })));
    }

    #[test]
    fn cycle_error_names_members() {
        let doc = MINIMAL.replace(
            r#""steps": [{"id": "s1", "target_part": "p1", "action": {"basic": {"kind": "hide"}}}]"#,
            r#""steps": [
                {"id": "a", "target_part": "p1", "action": {"basic": {"kind": "press"}}, "prerequisites": ["b"]},
                {"id": "b", "target_part": "p1", "action": {"basic": {"kind": "press"}}, "prerequisites": ["a"]}
            ]"#,
        );
        assert_eq!(parse_scenario(&doc), Err(ScenarioError::Cycle { members: vec!["a".into(), "b".into()] }));
    }

    #[test]
    fn hold_duration_defaults_to_zero() {
        let doc = MINIMAL.replace(r#""kind": "hide""#, r#""kind": "hold""#);
        let s = parse_scenario(&doc).unwrap();
        assert_eq!(s.steps[0].action, Action::Basic(BasicAction::hold(0)));
    }
}
