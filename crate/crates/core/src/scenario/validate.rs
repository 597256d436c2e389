// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeSet, HashMap, HashSet};

use serde::Serialize;

use super::{Scenario, ScenarioError, FORMAT_VERSION};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticCode {
    UnsupportedFormat,
    EmptyId,
    DuplicateId,
    InvalidValue,
    DanglingReference,
    Cycle,
    /// Lint only.
    Suspicious,
}

impl DiagnosticCode {
    /// Which diagnostic `parse_scenario` surfaces when several are present.
    pub(crate) fn parse_priority(self) -> u8 {
        match self {
            Self::UnsupportedFormat => 0,
            Self::EmptyId | Self::DuplicateId | Self::InvalidValue | Self::Suspicious => 1,
            Self::DanglingReference => 2,
            Self::Cycle => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    /// Path into the document, e.g. `steps[3].required_tool`.
    pub location: String,
    pub message: String,
    /// Identifiers the diagnostic is about (the dangling id, cycle members).
    pub ids: Vec<String>,
}

impl Diagnostic {
    fn error(code: DiagnosticCode, location: impl Into<String>, message: impl Into<String>) -> Self {
        Self { severity: Severity::Error, code, location: location.into(), message: message.into(), ids: Vec::new() }
    }

    fn with_ids(mut self, ids: Vec<String>) -> Self {
        self.ids = ids;
        self
    }

    pub(crate) fn into_error(self) -> ScenarioError {
        match self.code {
            DiagnosticCode::DanglingReference => ScenarioError::Reference {
                id: self.ids.into_iter().next().unwrap_or_default(),
                location: self.location,
            },
            DiagnosticCode::Cycle => ScenarioError::Cycle { members: self.ids },
            _ => ScenarioError::Schema { message: format!("{}: {}", self.location, self.message) },
        }
    }
}

/// Checks every scenario invariant. Returns an empty list iff the scenario
/// is valid.
pub fn validate_scenario(s: &Scenario) -> Vec<Diagnostic> {
    use DiagnosticCode::*;
    let mut out = Vec::new();

    if s.format != FORMAT_VERSION {
        out.push(Diagnostic::error(
            UnsupportedFormat,
            "format",
            format!("unsupported format {} (expected {FORMAT_VERSION})", s.format),
        ));
    }
    if s.id.is_empty() {
        out.push(Diagnostic::error(EmptyId, "id", "scenario id is empty"));
    }

    let mut check_ids = |kind: &str, ids: &mut dyn Iterator<Item = &str>| -> HashSet<String> {
        let mut seen = HashSet::new();
        for (i, id) in ids.enumerate() {
            let loc = format!("{kind}[{i}].id");
            if id.is_empty() {
                out.push(Diagnostic::error(EmptyId, loc, "id is empty"));
            } else if !seen.insert(id.to_owned()) {
                out.push(
                    Diagnostic::error(DuplicateId, loc, format!("duplicate {kind} id `{id}`"))
                        .with_ids(vec![id.to_owned()]),
                );
            }
        }
        seen
    };
    let stage_ids = check_ids("stages", &mut s.stages.iter().map(|x| x.id.as_str()));
    let part_ids = check_ids("parts", &mut s.parts.iter().map(|x| x.id.as_str()));
    let tool_ids = check_ids("tools", &mut s.tools.iter().map(|x| x.id.as_str()));
    let step_ids = check_ids("steps", &mut s.steps.iter().map(|x| x.id.as_str()));

    for (i, tool) in s.tools.iter().enumerate() {
        if let Some(t) = tool.torque_setting {
            if !(t.is_finite() && t > 0.0) {
                out.push(Diagnostic::error(
                    InvalidValue,
                    format!("tools[{i}].torque_setting"),
                    format!("torque setting must be positive, got {t}"),
                ));
            }
        }
    }

    let dangling = |loc: String, what: &str, id: &str| {
        Diagnostic::error(DanglingReference, loc, format!("unknown {what} `{id}`")).with_ids(vec![id.to_owned()])
    };
    for (i, step) in s.steps.iter().enumerate() {
        if let Some(stage) = &step.stage {
            if !stage_ids.contains(stage) {
                out.push(dangling(format!("steps[{i}].stage"), "stage", stage));
            }
        }
        if !part_ids.contains(&step.target_part) {
            out.push(dangling(format!("steps[{i}].target_part"), "part", &step.target_part));
        }
        if let Some(tool) = &step.required_tool {
            if !tool_ids.contains(tool) {
                out.push(dangling(format!("steps[{i}].required_tool"), "tool", tool));
            }
        }
        if let Some(t) = step.required_torque {
            if !(t.is_finite() && t > 0.0) {
                out.push(Diagnostic::error(
                    InvalidValue,
                    format!("steps[{i}].required_torque"),
                    format!("required torque must be positive, got {t}"),
                ));
            }
        }
        if let Err(msg) = step.action.check() {
            out.push(Diagnostic::error(InvalidValue, format!("steps[{i}].action"), msg));
        }
        for p in &step.prerequisites {
            if !step_ids.contains(p) {
                out.push(dangling(format!("steps[{i}].prerequisites"), "step", p));
            }
        }
    }

    for members in prerequisite_cycles(s) {
        out.push(
            Diagnostic::error(Cycle, "steps", format!("prerequisite cycle through {}", members.join(", ")))
                .with_ids(members),
        );
    }
    out
}

/// Non-fatal observations about a valid scenario.
pub fn lint_scenario(s: &Scenario) -> Vec<Diagnostic> {
    let warn = |location: String, message: String| Diagnostic {
        severity: Severity::Warning,
        code: DiagnosticCode::Suspicious,
        location,
        message,
        ids: Vec::new(),
    };
    let mut out = Vec::new();
    for (i, step) in s.steps.iter().enumerate() {
        if step.required_torque.is_some() && step.required_tool.is_none() {
            out.push(warn(format!("steps[{i}]"), "required torque without a required tool".into()));
        }
        if !s.stages.is_empty() && step.stage.is_none() {
            out.push(warn(format!("steps[{i}].stage"), "step belongs to no stage".into()));
        }
    }
    let used: BTreeSet<&str> = s.steps.iter().filter_map(|st| st.required_tool.as_deref()).collect();
    for (i, tool) in s.tools.iter().enumerate() {
        if !used.contains(tool.id.as_str()) {
            out.push(warn(format!("tools[{i}]"), format!("tool `{}` is never required", tool.id)));
        }
    }
    for (i, stage) in s.stages.iter().enumerate() {
        if s.steps_in_stage(&stage.id).next().is_none() {
            out.push(warn(format!("stages[{i}]"), format!("stage `{}` has no steps", stage.id)));
        }
    }
    out
}

/// Strongly connected components of the prerequisite graph that contain a
/// cycle, each listed in authored step order. Dangling edges are ignored.
pub(crate) fn prerequisite_cycles(s: &Scenario) -> Vec<Vec<String>> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, step) in s.steps.iter().enumerate() {
        index.entry(step.id.as_str()).or_insert(i);
    }
    let edges: Vec<Vec<usize>> = s
        .steps
        .iter()
        .map(|st| st.prerequisites.iter().filter_map(|p| index.get(p.as_str()).copied()).collect())
        .collect();

    let mut cycles: Vec<Vec<usize>> =
        tarjan(&edges).into_iter().filter(|c| c.len() > 1 || edges[c[0]].contains(&c[0])).collect();
    for c in &mut cycles {
        c.sort_unstable();
    }
    cycles.sort();
    cycles.into_iter().map(|c| c.into_iter().map(|i| s.steps[i].id.clone()).collect()).collect()
}

fn tarjan(edges: &[Vec<usize>]) -> Vec<Vec<usize>> {
    struct State<'a> {
        edges: &'a [Vec<usize>],
        next: usize,
        index: Vec<Option<usize>>,
        low: Vec<usize>,
        on_stack: Vec<bool>,
        stack: Vec<usize>,
        out: Vec<Vec<usize>>,
    }

    fn visit(st: &mut State<'_>, v: usize) {
        st.index[v] = Some(st.next);
        st.low[v] = st.next;
        st.next += 1;
        st.stack.push(v);
        st.on_stack[v] = true;
        for &w in &st.edges[v] {
            match st.index[w] {
                None => {
                    visit(st, w);
                    st.low[v] = st.low[v].min(st.low[w]);
                }
                Some(iw) if st.on_stack[w] => st.low[v] = st.low[v].min(iw),
                Some(_) => {}
            }
        }
        if Some(st.low[v]) == st.index[v] {
            let mut comp = Vec::new();
            loop {
                let w = st.stack.pop().expect("tarjan stack underflow");
                st.on_stack[w] = false;
                comp.push(w);
                if w == v {
                    break;
                }
            }
            st.out.push(comp);
        }
    }

    let n = edges.len();
    let mut st = State {
        edges,
        next: 0,
        index: vec![None; n],
        low: vec![0; n],
        on_stack: vec![false; n],
        stack: Vec::new(),
        out: Vec::new(),
    };
    for v in 0..n {
        if st.index[v].is_none() {
            visit(&mut st, v);
        }
    }
    st.out
}
