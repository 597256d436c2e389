// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::sync::Arc;

use super::{Attempt, HintConfig, Mode, ScoringRules, Session, SessionError};
use crate::scenario::{Action, BasicAction, Scenario};

/// Plays a scenario start to finish in authored order. The first step of
/// every stage in `failing` is attempted once with a wrong action before
/// the correct attempt, so exactly those stages come out incorrect.
pub fn scripted_run(
    id: impl Into<String>,
    scenario: Arc<Scenario>,
    mode: Mode,
    hints: HintConfig,
    failing: &BTreeSet<String>,
) -> Result<Session, SessionError> {
    let rules = ScoringRules::default_for(&scenario);
    let mut s = Session::start(id, Arc::clone(&scenario), mode, hints, rules)?;
    let mut failed = BTreeSet::new();
    let mut t = 0;
    for step in &scenario.steps {
        if let Some(stage) = &step.stage {
            if failing.contains(stage) && failed.insert(stage.clone()) {
                t += 500;
                let wrong = if step.action == Action::Basic(BasicAction::Press) {
                    BasicAction::Hide
                } else {
                    BasicAction::Press
                };
                let mut bad = Attempt::correct_for(step).at(t);
                bad.action = Action::Basic(wrong);
                s.attempt(&bad)?;
            }
        }
        t += 1000;
        s.attempt(&Attempt::correct_for(step).at(t))?;
    }
    Ok(s)
}
