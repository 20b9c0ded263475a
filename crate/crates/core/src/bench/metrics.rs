use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{BenchError, RunRecord};

/// Times below this are raised to it before the IPC ratio is taken, so that
/// near-instant solvers do not make every competitor's score collapse.
pub const IPC_TIME_FLOOR: f64 = 1.0;

/// Median by time with unsolved runs ordered last, so a solved majority
/// yields a solved median. Ties keep the lower run index.
pub fn median_record(records: &[RunRecord]) -> Result<RunRecord, BenchError> {
    if records.is_empty() || records.len().is_multiple_of(2) {
        return Err(BenchError::EvenCount(records.len()));
    }
    let mut sorted: Vec<&RunRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (!a.solved)
            .cmp(&!b.solved)
            .then(a.time_seconds.total_cmp(&b.time_seconds))
            .then(a.run_index.cmp(&b.run_index))
    });
    Ok(sorted[sorted.len() / 2].clone())
}

/// Mean penalized runtime over one record per problem.
pub fn par10(records: &[RunRecord], cutoff: f64) -> Result<f64, BenchError> {
    if records.is_empty() {
        return Err(BenchError::Empty);
    }
    let mut seen = BTreeSet::new();
    let mut total = 0.0;
    for r in records {
        if !seen.insert(&r.problem_id) {
            return Err(BenchError::Inconsistent(format!(
                "problem `{}` appears more than once",
                r.problem_id
            )));
        }
        total += if r.solved { r.time_seconds } else { 10.0 * cutoff };
    }
    Ok(total / records.len() as f64)
}

/// Score of a solver taking `t` seconds when the best compared time is
/// `t_star`.
pub fn ipc_score(t: f64, t_star: f64) -> f64 {
    let t = t.max(IPC_TIME_FLOOR);
    let t_star = t_star.max(IPC_TIME_FLOOR);
    1.0 / (1.0 + (t / t_star).log10())
}

/// IPC score per planner over median records, one per (planner, problem).
pub fn ipc_scores(records: &[RunRecord]) -> Result<BTreeMap<String, f64>, BenchError> {
    ipc_scores_by(records, |r| r.planner_id.clone())
}

/// IPC score per compared system, where `key` names the system a record
/// belongs to. Every system must have exactly one record per problem.
pub fn ipc_scores_by<K: Ord + Clone>(
    records: &[RunRecord],
    key: impl Fn(&RunRecord) -> K,
) -> Result<BTreeMap<K, f64>, BenchError> {
    let mut by_problem: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        by_problem.entry(&r.problem_id).or_default().push(r);
    }
    let systems: BTreeSet<K> = records.iter().map(&key).collect();
    let mut scores: BTreeMap<K, f64> = systems.iter().map(|k| (k.clone(), 0.0)).collect();
    for (problem, rs) in &by_problem {
        let keys: BTreeSet<K> = rs.iter().map(|r| key(r)).collect();
        if keys.len() != rs.len() || keys != systems {
            return Err(BenchError::Inconsistent(format!(
                "problem `{problem}` does not have exactly one record per compared system"
            )));
        }
        let t_star = rs
            .iter()
            .filter(|r| r.solved)
            .map(|r| r.time_seconds.max(IPC_TIME_FLOOR))
            .min_by(f64::total_cmp);
        let Some(t_star) = t_star else { continue };
        for r in rs.iter().filter(|r| r.solved) {
            *scores.get_mut(&key(r)).unwrap() += ipc_score(r.time_seconds, t_star);
        }
    }
    Ok(scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Coverage {
    pub solved: usize,
    pub total: usize,
    pub fraction: f64,
}

pub fn coverage(records: &[RunRecord]) -> Coverage {
    let solved = records.iter().filter(|r| r.solved).count();
    let total = records.len();
    Coverage {
        solved,
        total,
        fraction: if total == 0 {
            0.0
        } else {
            solved as f64 / total as f64
        },
    }
}
