// SPDX-License-Identifier: Apache-2.0

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::validate::prerequisite_cycles;
use super::{Scenario, ScenarioError};

/// Orders steps so that each appears after all of its prerequisites. Among
/// steps that are ready at the same time, the one authored first wins, which
/// makes the order the lexicographically smallest valid one by authored
/// index.
pub fn topological_order(s: &Scenario) -> Result<Vec<String>, ScenarioError> {
    let index: HashMap<&str, usize> = s.steps.iter().enumerate().map(|(i, st)| (st.id.as_str(), i)).collect();
    let n = s.steps.len();
    let mut pending = vec![0usize; n];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, step) in s.steps.iter().enumerate() {
        for p in &step.prerequisites {
            let &j = index.get(p.as_str()).ok_or_else(|| ScenarioError::Reference {
                id: p.clone(),
                location: format!("steps[{i}].prerequisites"),
            })?;
            pending[i] += 1;
            dependents[j].push(i);
        }
    }

    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&i| pending[i] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(i)) = ready.pop() {
        order.push(s.steps[i].id.clone());
        for &d in &dependents[i] {
            pending[d] -= 1;
            if pending[d] == 0 {
                ready.push(Reverse(d));
            }
        }
    }
    if order.len() < n {
        let members = prerequisite_cycles(s).into_iter().next().unwrap_or_default();
        return Err(ScenarioError::Cycle { members });
    }
    Ok(order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{fixture, BasicAction, Direction, Part, PartCategory, PartState, Step};
    use proptest::prelude::*;

    fn scenario(edges: &[(&str, &[&str])]) -> Scenario {
        let mut s = Scenario::new("t", "demo", Direction::Assembly);
        s.parts.push(Part {
            id: "p".into(),
            display_name: "P".into(),
            category: PartCategory::Component,
            initial_state: PartState::Removed,
        });
        for (id, pre) in edges {
            s.steps.push(Step::new(*id, "p", BasicAction::Press).after(pre.iter().copied()));
        }
        s
    }

    /// Every permutation of authored indices, filtered to those respecting
    /// prerequisites; returns the lexicographically smallest.
    fn brute_force(s: &Scenario) -> Option<Vec<String>> {
        fn permute(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if rest.is_empty() {
                out.push(prefix.clone());
                return;
            }
            for k in 0..rest.len() {
                let x = rest.remove(k);
                prefix.push(x);
                permute(prefix, rest, out);
                prefix.pop();
                rest.insert(k, x);
            }
        }
        let n = s.steps.len();
        let mut all = Vec::new();
        permute(&mut Vec::new(), &mut (0..n).collect(), &mut all);
        all.into_iter()
            .filter(|perm| {
                perm.iter().enumerate().all(|(pos, &i)| {
                    s.steps[i].prerequisites.iter().all(|p| {
                        let j = s.step_index(p).unwrap();
                        perm[..pos].contains(&j)
                    })
                })
            })
            .min()
            .map(|perm| perm.into_iter().map(|i| s.steps[i].id.clone()).collect())
    }

    #[test]
    fn chain() {
        let s = scenario(&[("s1", &[]), ("s2", &["s1"]), ("s3", &["s2"])]);
        assert_eq!(topological_order(&s).unwrap(), ["s1", "s2", "s3"]);
    }

    #[test]
    fn diamond_matches_brute_force() {
        let s = scenario(&[("s1", &[]), ("s2", &["s1"]), ("s3", &["s1"]), ("s4", &["s2", "s3"])]);
        let expected = brute_force(&s).unwrap();
        assert_eq!(expected, ["s1", "s2", "s3", "s4"]);
        assert_eq!(topological_order(&s).unwrap(), expected);
    }

    #[test]
    fn authored_order_breaks_ties_even_when_reversed() {
        let s = scenario(&[("z", &[]), ("y", &["z"]), ("x", &[])]);
        assert_eq!(topological_order(&s).unwrap(), ["z", "y", "x"]);
    }

    #[test]
    fn cycle_is_an_error() {
        let s = scenario(&[("a", &["b"]), ("b", &["a"]), ("c", &[])]);
        assert_eq!(topological_order(&s), Err(ScenarioError::Cycle { members: vec!["a".into(), "b".into()] }));
    }

    #[test]
    fn fixture_runs_s1_through_s7() {
        let s = fixture::verano();
        let order = topological_order(&s).unwrap();
        let stages: Vec<&str> = order.iter().map(|id| s.step(id).unwrap().stage.as_deref().unwrap()).collect();
        let mut sorted = stages.clone();
        sorted.sort();
        assert_eq!(stages, sorted);
        assert_eq!(stages.first(), Some(&"S1"));
        assert_eq!(stages.last(), Some(&"S7"));
    }

    fn random_dag() -> impl Strategy<Value = Scenario> {
        (1usize..7).prop_flat_map(|n| {
            proptest::collection::vec(proptest::collection::vec(any::<bool>(), n), n).prop_map(move |m| {
                // Random labels so authored order differs from id order;
                // edges only point to earlier indices of a shuffled rank.
                let ids: Vec<String> = (0..n).map(|i| format!("n{}", (i * 5 + 3) % 11)).collect();
                let rank: Vec<usize> = (0..n).map(|i| (i * 3 + 1) % n).collect();
                let mut s = scenario(&[]);
                for i in 0..n {
                    let pre: Vec<String> =
                        (0..n).filter(|&j| m[i][j] && rank[j] < rank[i]).map(|j| ids[j].clone()).collect();
                    s.steps.push(Step::new(ids[i].clone(), "p", BasicAction::Press).after(pre));
                }
                s
            })
        })
    }

    proptest! {
        #[test]
        fn order_equals_brute_force(s in random_dag()) {
            prop_assert_eq!(Some(topological_order(&s).unwrap()), brute_force(&s));
        }

        #[test]
        fn order_is_a_valid_permutation(s in random_dag()) {
            let order = topological_order(&s).unwrap();
            prop_assert_eq!(order.len(), s.steps.len());
            for (pos, id) in order.iter().enumerate() {
                for p in &s.step(id).unwrap().prerequisites {
                    prop_assert!(order[..pos].contains(p));
                }
            }
        }
    }
}
