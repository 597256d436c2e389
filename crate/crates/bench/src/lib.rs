// SPDX-License-Identifier: Apache-2.0

//! Inputs shared by the benchmarks.

use trainer_core::scenario::fixture::verano;
use trainer_core::{Attempt, BasicAction, Direction, HintConfig, Mode, Scenario, ScoringRules, Session, Step};

/// A layered DAG of `layers * width` steps; every step depends on the
/// whole previous layer.
pub fn layered_scenario(layers: usize, width: usize) -> Scenario {
    let mut sc = Scenario::new("layered", "synthetic", Direction::Assembly);
    sc.parts = verano().parts;
    let part = sc.parts[0].id.clone();
    for l in 0..layers {
        for w in 0..width {
            let prev = if l == 0 { Vec::new() } else { (0..width).map(|p| format!("l{}-{p}", l - 1)).collect() };
            sc.steps.push(Step::new(format!("l{l}-{w}"), part.clone(), BasicAction::Press).after(prev));
        }
    }
    sc
}

/// A finished perfect run of the fixture.
pub fn perfect_session(mode: Mode) -> Session {
    let sc = verano();
    let rules = ScoringRules::default_for(&sc);
    let mut s = Session::start("bench", sc.clone(), mode, HintConfig::T3, rules).expect("fixture is valid");
    for (i, step) in sc.steps.iter().enumerate() {
        s.attempt(&Attempt::correct_for(step).at(i as u64 * 1000)).expect("fixture steps exist");
    }
    s
}
