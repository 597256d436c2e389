// SPDX-License-Identifier: Apache-2.0

//! The shipped `verano-s1-s7` scenario.
//!
//! Seven stages, fifteen steps, disassembly direction. Stage names follow the
//! seven assessed operations; step content is illustrative training
//! material, not a factory service procedure.

use super::{parse_scenario, Scenario};

pub const VERANO_ID: &str = "verano-s1-s7";

/// Canonical file contents.
pub const VERANO_JSON: &str = include_str!("../../fixtures/verano-s1-s7.json");

pub const STAGE_IDS: [&str; 7] = ["S1", "S2", "S3", "S4", "S5", "S6", "S7"];

pub fn verano() -> Scenario {
    parse_scenario(VERANO_JSON).expect("shipped fixture is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::serialize_scenario;

    #[test]
    fn golden_bytes() {
        assert_eq!(serialize_scenario(&verano()), VERANO_JSON);
    }

    #[test]
    fn seven_named_stages() {
        let s = verano();
        let names: Vec<(&str, &str)> = s.stages.iter().map(|st| (st.id.as_str(), st.name.as_str())).collect();
        assert_eq!(
            names,
            [
                ("S1", "preparing all needs"),
                ("S2", "setup tools (correct torque)"),
                ("S3", "screws"),
                ("S4", "oil cooler & water pump"),
                ("S5", "fuel rail & injectors"),
                ("S6", "piston & cylinder"),
                ("S7", "arrange parts correctly"),
            ]
        );
        assert_eq!(s.steps.len(), 15);
        for id in STAGE_IDS {
            let n = s.steps_in_stage(id).count();
            assert!((1..=4).contains(&n), "{id} has {n} steps");
        }
    }

    #[test]
    fn main_wrench_step_needs_35_nm() {
        let s = verano();
        let step = s.step("s2-set-main-wrench").unwrap();
        assert_eq!(step.required_torque, Some(35.0));
        assert!(matches!(&step.action, crate::scenario::Action::Composite(c) if c.name == "screw"));
    }
}
