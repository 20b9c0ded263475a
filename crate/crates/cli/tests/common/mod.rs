#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use domconf::bench::{Clock, FailureKind, Randomization, ResultHeader, RunLimits, RESULTS_SCHEMA};
use domconf::RunRecord;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/fixtures")
        .join(name)
}

pub fn domconf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_domconf"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// Runs and requires success; returns stdout.
pub fn ok(args: &[&str]) -> Vec<u8> {
    let out = domconf(args);
    assert!(
        out.status.success(),
        "domconf {args:?} exited {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

pub fn record(planner: &str, variant: &str, problem: &str, config: &str, time: Option<f64>) -> RunRecord {
    RunRecord {
        planner_id: planner.into(),
        variant: variant.into(),
        domain_file_digest: "0".repeat(16),
        problem_id: problem.into(),
        config_digest: config.into(),
        run_index: 0,
        solved: time.is_some(),
        time_seconds: time.unwrap_or(300.0),
        failure_kind: if time.is_some() { FailureKind::None } else { FailureKind::Timeout },
        plan_length: time.map(|_| 2),
        clock: Clock::Cpu,
        cutoff_seconds: 300.0,
        plan_file: None,
        detail: None,
    }
}

/// Writes a results file with one repetition per cell.
pub fn write_results(path: &Path, records: &[RunRecord]) {
    let names = |f: fn(&RunRecord) -> &String| {
        let mut v: Vec<String> = records.iter().map(|r| f(r).clone()).collect();
        v.sort();
        v.dedup();
        v
    };
    let header = ResultHeader {
        schema: RESULTS_SCHEMA.into(),
        planners: names(|r| &r.planner_id),
        variants: names(|r| &r.variant),
        problems: names(|r| &r.problem_id),
        limits: RunLimits {
            cutoff_seconds: 300.0,
            memory_megabytes: 4096,
            repetitions: 1,
        },
        randomization: Randomization::Off,
    };
    let mut text = serde_json::to_string(&header).unwrap() + "\n";
    for r in records {
        text += &(serde_json::to_string(r).unwrap() + "\n");
    }
    fs::write(path, text).unwrap();
}

/// Two planners over twelve problems; `b` is faster on most of them.
pub fn sample_records() -> Vec<RunRecord> {
    let mut out = Vec::new();
    for i in 0..12 {
        let p = format!("p{i:02}");
        let a = if i == 11 { None } else { Some(10.0 + 3.0 * i as f64) };
        let b = Some(8.0 + 2.5 * i as f64 + if i % 4 == 0 { 9.0 } else { 0.0 });
        out.push(record("a", "input", &p, "c0", a));
        out.push(record("b", "input", &p, "c0", b));
    }
    out
}

/// A shell planner that writes a two-step BlocksWorld plan only when
/// `first_op` is the first action of the domain it is given.
pub fn write_mock_planner(dir: &Path, first_op: &str) -> PathBuf {
    let path = dir.join("mock.sh");
    fs::write(
        &path,
        format!(
            "#!/bin/sh\n\
             first=$(grep -m1 '(:action' \"$1\" | awk '{{print $2}}')\n\
             [ \"$first\" = {first_op} ] || exit 1\n\
             printf '(pick-up a)\\n(stack a b)\\n' > \"$3\"\n"
        ),
    )
    .unwrap();
    path
}
