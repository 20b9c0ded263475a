#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};
use std::path::PathBuf;

use domconf::pddl::{apply_action, Atom, GroundTask, State};
use domconf::{parse_domain, parse_problem, DomainModel, ProblemModel};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn fixture(name: &str) -> String {
    std::fs::read_to_string(fixture_path(name)).unwrap()
}

pub fn domain(name: &str) -> DomainModel {
    parse_domain(&fixture(name)).unwrap()
}

pub fn problem(name: &str) -> ProblemModel {
    parse_problem(&fixture(name)).unwrap()
}

/// Breadth-first closure of the initial state under the actions `keep` admits.
pub fn reachable_states(task: &GroundTask, keep: impl Fn(&str) -> bool) -> Vec<State> {
    let mut seen = BTreeSet::from([task.init.clone()]);
    let mut order = vec![task.init.clone()];
    let mut queue = VecDeque::from([task.init.clone()]);
    while let Some(s) = queue.pop_front() {
        for (id, a) in task.actions.iter().enumerate() {
            if !keep(&a.operator) {
                continue;
            }
            if let Ok(next) = apply_action(task, &s, id) {
                if seen.insert(next.clone()) {
                    order.push(next.clone());
                    queue.push_back(next);
                }
            }
        }
    }
    order
}

/// Reachable states as atom sets, comparable across groundings.
pub fn reachable_atoms(task: &GroundTask) -> BTreeSet<BTreeSet<Atom>> {
    reachable_states(task, |_| true)
        .iter()
        .map(|s| task.state_atoms(s))
        .collect()
}
