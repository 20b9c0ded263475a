mod common;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use domconf::pddl::{ground_task, validate_plan, validate_plan_lifted, GroundTask, PlanStep, State};
use domconf::{apply_configuration, parse_domain, print_domain, random_configuration};

const TOY_TASKS: [(&str, &str); 3] = [
    ("blocksworld.pddl", "blocksworld-p3.pddl"),
    ("parking.pddl", "parking-p3.pddl"),
    ("matching-bw.pddl", "matching-bw-p3.pddl"),
];

#[test]
fn configured_models_reach_the_same_states() {
    for (d, p) in TOY_TASKS {
        let domain = common::domain(d);
        let problem = common::problem(p);
        assert!(problem.objects.len() <= 3);
        let base = common::reachable_atoms(&ground_task(&domain, &problem).unwrap());
        assert!(base.len() > 1, "{p} is trivial");
        for seed in 0..200u64 {
            let c = random_configuration(&domain, seed);
            let configured = apply_configuration(&domain, &c).unwrap();
            let reparsed = parse_domain(&print_domain(&configured)).unwrap();
            let task = ground_task(&reparsed, &problem).unwrap();
            assert_eq!(common::reachable_atoms(&task), base, "{d} seed {seed}");
        }
    }
}

/// Shortest plan by breadth-first search.
fn oracle_plan(task: &GroundTask) -> Option<Vec<usize>> {
    let mut parent: BTreeMap<State, Option<(State, usize)>> = BTreeMap::new();
    parent.insert(task.init.clone(), None);
    let mut queue = VecDeque::from([task.init.clone()]);
    while let Some(s) = queue.pop_front() {
        if task.is_goal(&s) {
            let mut plan = Vec::new();
            let mut cur = s;
            while let Some(Some((prev, a))) = parent.get(&cur).cloned() {
                plan.push(a);
                cur = prev;
            }
            plan.reverse();
            return Some(plan);
        }
        for id in 0..task.actions.len() {
            let a = &task.actions[id];
            if a.pre.iter().all(|p| s.contains(p)) {
                let mut next = s.clone();
                for d in &a.del {
                    next.remove(d);
                }
                next.extend(a.add.iter().copied());
                if !parent.contains_key(&next) {
                    parent.insert(next.clone(), Some((s.clone(), id)));
                    queue.push_back(next);
                }
            }
        }
    }
    None
}

fn steps(task: &GroundTask, ids: &[usize]) -> Vec<PlanStep> {
    ids.iter()
        .map(|&i| PlanStep {
            operator: task.actions[i].operator.clone(),
            args: task.actions[i].args.clone(),
        })
        .collect()
}

/// First failing step (1-based) by direct simulation, `Some(0)` for an
/// unmet goal, `None` if the plan is valid.
fn simulate(task: &GroundTask, ids: &[usize]) -> Option<usize> {
    let mut s = task.init.clone();
    for (i, &id) in ids.iter().enumerate() {
        let a = &task.actions[id];
        if !a.pre.iter().all(|p| s.contains(p)) {
            return Some(i + 1);
        }
        let dels: BTreeSet<_> = a.del.iter().collect();
        s.retain(|x| !dels.contains(x));
        s.extend(a.add.iter().copied());
    }
    (!task.is_goal(&s)).then_some(0)
}

#[test]
fn validator_agrees_with_search_and_simulation() {
    for (d, p) in TOY_TASKS
        .into_iter()
        .chain([("depots.pddl", "depots-p1.pddl"), ("satellite.pddl", "satellite-p1.pddl")])
    {
        let domain = common::domain(d);
        let problem = common::problem(p);
        let task = ground_task(&domain, &problem).unwrap();
        let plan = oracle_plan(&task).unwrap_or_else(|| panic!("{p} unsolvable"));
        let report = validate_plan(&task, &steps(&task, &plan)).unwrap();
        assert!(report.valid, "{p}: {report:?}");
        assert!(validate_plan_lifted(&domain, &problem, &steps(&task, &plan)).unwrap().valid);

        // every single-step deletion and adjacent swap, checked against simulation
        let mut variants = Vec::new();
        for i in 0..plan.len() {
            let mut v = plan.clone();
            v.remove(i);
            variants.push(v);
            if i + 1 < plan.len() {
                let mut v = plan.clone();
                v.swap(i, i + 1);
                variants.push(v);
            }
        }
        for v in variants {
            let expected = simulate(&task, &v);
            let ground = validate_plan(&task, &steps(&task, &v)).unwrap();
            let lifted = validate_plan_lifted(&domain, &problem, &steps(&task, &v)).unwrap();
            for r in [&ground, &lifted] {
                assert_eq!(r.valid, expected.is_none(), "{p}");
                if let Some(step) = expected.filter(|&s| s > 0) {
                    assert_eq!(r.fail_step, Some(step), "{p}");
                }
            }
        }
    }
}
