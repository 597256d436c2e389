// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeSet, HashMap};

use super::{validate_scenario, InverseLibrary, PartState, Scenario, ScenarioError, Step};

const INVERSE_SUFFIX: &str = "-inverse";

/// [`invert_scenario_with`] using the standard composite library.
pub fn invert_scenario(s: &Scenario) -> Result<Scenario, ScenarioError> {
    invert_scenario_with(s, &InverseLibrary::standard())
}

/// Turns a disassembly procedure into the matching assembly procedure, or
/// the other way round.
///
/// Steps run in reverse, every prerequisite edge is flipped and each action
/// is replaced by its inverse. Parts start where the original procedure
/// leaves them: installed and removed swap, hidden stays hidden (a hide in
/// the inverted procedure restores the part). The scenario id gains or loses
/// an `-inverse` suffix, so inverting twice gives back the original exactly.
pub fn invert_scenario_with(s: &Scenario, library: &InverseLibrary) -> Result<Scenario, ScenarioError> {
    if let Some(d) = validate_scenario(s).into_iter().min_by_key(|d| d.code.parse_priority()) {
        return Err(d.into_error());
    }

    let mut dependents: HashMap<&str, BTreeSet<String>> = HashMap::new();
    for step in &s.steps {
        for p in &step.prerequisites {
            dependents.entry(p.as_str()).or_default().insert(step.id.clone());
        }
    }

    let steps = s
        .steps
        .iter()
        .rev()
        .map(|step| {
            let action = library.invert(&step.action).ok_or_else(|| ScenarioError::MissingInverse {
                step: step.id.clone(),
                composite: match &step.action {
                    super::Action::Composite(c) => c.name.clone(),
                    super::Action::Basic(b) => b.to_string(),
                },
            })?;
            Ok(Step { action, prerequisites: dependents.remove(step.id.as_str()).unwrap_or_default(), ..step.clone() })
        })
        .collect::<Result<Vec<_>, ScenarioError>>()?;

    let id = match s.id.strip_suffix(INVERSE_SUFFIX) {
        Some(base) => base.to_owned(),
        None => format!("{}{INVERSE_SUFFIX}", s.id),
    };

    let mut parts = s.parts.clone();
    for part in &mut parts {
        part.initial_state = match part.initial_state {
            PartState::Installed => PartState::Removed,
            PartState::Removed => PartState::Installed,
            PartState::Hidden => PartState::Hidden,
        };
    }

    Ok(Scenario {
        format: s.format,
        id,
        engine_name: s.engine_name.clone(),
        direction: s.direction.reversed(),
        stages: s.stages.iter().rev().cloned().collect(),
        parts,
        tools: s.tools.clone(),
        steps,
        tutorial: s.tutorial.clone(),
    })
}
