mod common;

use std::fs;

use common::{domconf, fixture, ok};
use domconf::{parse_domain, ConfigurationSpec};

fn path(name: &str) -> String {
    fixture(name).to_string_lossy().into_owned()
}

fn action_names(pddl: &[u8]) -> Vec<String> {
    let d = parse_domain(std::str::from_utf8(pddl).unwrap()).unwrap();
    d.operators.into_iter().map(|o| o.name).collect()
}

#[test]
fn space_size_prints_exact_and_scientific() {
    let out = ok(&["space-size", &path("blocksworld.pddl")]);
    assert_eq!(String::from_utf8(out).unwrap(), "1719926784000\n1.72e12\n");
    let out = ok(&["space-size", &path("blocksworld.pddl"), "--operator", "pick-up"]);
    assert_eq!(String::from_utf8(out).unwrap().lines().next(), Some("144"));
}

#[test]
fn order_writes_the_heuristic_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.pddl");
    ok(&["order", "--heuristic", "eff2", &path("blocksworld.pddl"), "-o", out.to_str().unwrap()]);
    // eff2 sorts by increasing effect count; ties keep model order
    assert_eq!(
        action_names(&fs::read(&out).unwrap()),
        ["pick-up", "put-down", "stack", "unstack"]
    );
}

#[test]
fn shuffle_config_matches_extract_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    let shuffled = dir.path().join("s.pddl");
    ok(&[
        "shuffle", "--seed", "11", &path("parking.pddl"),
        "--config-out", cfg.to_str().unwrap(), "-o", shuffled.to_str().unwrap(),
    ]);
    let drawn: ConfigurationSpec = serde_json::from_slice(&fs::read(&cfg).unwrap()).unwrap();
    let extracted: ConfigurationSpec =
        serde_json::from_slice(&ok(&["extract-config", shuffled.to_str().unwrap()])).unwrap();
    assert_eq!(drawn, extracted);
}

#[test]
fn shuffle_without_seed_reports_one() {
    let out = domconf(&["shuffle", &path("blocksworld.pddl")]);
    assert!(out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    let seed = stderr.trim().strip_prefix("seed: ").expect("seed printed");
    let replay = ok(&["shuffle", "--seed", seed, &path("blocksworld.pddl")]);
    assert_eq!(replay, out.stdout);
}

#[test]
fn decode_accepts_plain_arrays() {
    let dir = tempfile::tempdir().unwrap();
    let v = dir.path().join("v.json");
    // reverse every group of the 36-dimensional BlocksWorld vector
    let values: Vec<f64> = (0..36).map(|i| 1.0 - i as f64 / 36.0).collect();
    fs::write(&v, serde_json::to_string(&values).unwrap()).unwrap();
    let out = ok(&["decode", &path("blocksworld.pddl"), v.to_str().unwrap()]);
    assert_eq!(action_names(&out), ["unstack", "stack", "put-down", "pick-up"]);

    fs::write(&v, "[0.5, 0.5]").unwrap();
    let bad = domconf(&["decode", &path("blocksworld.pddl"), v.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn macro_subcommands() {
    let recipe = path("recipes/blocksworld-unstack-putdown.json");
    let built = String::from_utf8(ok(&["macro", "build", &path("blocksworld.pddl"), &recipe])).unwrap();
    assert!(built.trim_start().starts_with("(:action unstack-put-down"), "{built}");

    let inserted = ok(&[
        "macro", "insert", &path("blocksworld.pddl"), &recipe, "--position", "top",
    ]);
    assert_eq!(action_names(&inserted)[0], "unstack-put-down");

    let dir = tempfile::tempdir().unwrap();
    ok(&["macro", "enumerate", &path("blocksworld.pddl"), &recipe, "-o", dir.path().to_str().unwrap()]);
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 5);

    let depots = path("recipes/depots-unload-drop.json");
    let placed = ok(&[
        "macro", "place", &path("depots.pddl"),
        "--add", &format!("{depots}=between:1"),
    ]);
    assert_eq!(
        action_names(&placed),
        ["drive", "lift", "drop", "unload-drop", "load", "unload"]
    );
}

#[test]
fn validate_reports_plans() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("plan");
    fs::write(&plan, "(pick-up a)\n(stack a b)\n").unwrap();
    let args = |p: &str| {
        vec![
            "validate".to_string(),
            path("blocksworld.pddl"),
            path("blocksworld-p2.pddl"),
            "--plan".into(),
            p.to_string(),
        ]
    };
    let run = |p: &str| {
        let a = args(p);
        domconf(&a.iter().map(String::as_str).collect::<Vec<_>>())
    };
    let good = run(plan.to_str().unwrap());
    assert_eq!(good.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&good.stdout).unwrap();
    assert_eq!(report["valid"], true);

    fs::write(&plan, "(stack a b)\n").unwrap();
    let bad = run(plan.to_str().unwrap());
    assert_eq!(bad.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&bad.stdout).unwrap();
    assert_eq!(report["valid"], false);
    assert_eq!(report["failStep"], 1);
}

#[test]
fn exit_codes() {
    // usage errors, before touching any file
    assert_eq!(domconf(&[]).status.code(), Some(1));
    assert_eq!(domconf(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(
        domconf(&["order", "--heuristic", "eff3", "/nonexistent"]).status.code(),
        Some(1)
    );
    assert_eq!(
        domconf(&["macro", "insert", "a", "b", "--position", "between:x"]).status.code(),
        Some(1)
    );
    assert_eq!(domconf(&["bench", "run", "p.json", "-o", "r", "--reps", "2"]).status.code(), Some(1));
    assert_eq!(domconf(&["tune", "t.json", "-o", "r", "--cutoff", "-1"]).status.code(), Some(1));
    // input errors
    assert_eq!(domconf(&["space-size", "/nonexistent"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let broken = dir.path().join("broken.pddl");
    fs::write(&broken, "(define (domain x) (:predicates (p)").unwrap();
    let out = domconf(&["space-size", broken.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error:"));
    // help
    for sub in [
        vec!["--help"], vec!["validate", "--help"], vec!["macro", "place", "--help"],
        vec!["bench", "run", "--help"], vec!["tune", "--help"], vec!["report", "bootstrap", "--help"],
    ] {
        assert_eq!(domconf(&sub).status.code(), Some(0), "{sub:?}");
    }
}

#[test]
fn report_subcommands() {
    let dir = tempfile::tempdir().unwrap();
    let results = dir.path().join("r.jsonl");
    common::write_results(&results, &common::sample_records());
    let r = results.to_str().unwrap();

    let csv = String::from_utf8(ok(&["report", "summarize", r])).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("planner,variant,problems,par10"));
    let a: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(a[0], "a");
    assert_eq!(a[5], "11");

    let json: serde_json::Value =
        serde_json::from_slice(&ok(&["report", "summarize", r, "--format", "json", "--group-by", "planner"])).unwrap();
    assert_eq!(json.as_array().unwrap().len(), 2);

    let w: serde_json::Value = serde_json::from_slice(&ok(&[
        "report", "wilcoxon", r, "--planner-a", "a", "--planner-b", "b",
    ]))
    .unwrap();
    assert_eq!(w["n"], 12);
    assert_eq!(w["method"], "exact");

    let missing = domconf(&["report", "wilcoxon", r, "--planner-a", "a", "--planner-b", "zz"]);
    assert_eq!(missing.status.code(), Some(2));

    let boot: serde_json::Value =
        serde_json::from_slice(&ok(&["report", "bootstrap", r, "--seed", "4"])).unwrap();
    // a single configuration per problem leaves nothing to resample
    assert_eq!(boot[0]["min"], boot[0]["max"]);
}

#[test]
fn bench_run_reports_partial_failure() {
    let dir = tempfile::tempdir().unwrap();
    let mock = common::write_mock_planner(dir.path(), "pick-up");
    fs::copy(fixture("blocksworld.pddl"), dir.path().join("bw.pddl")).unwrap();
    fs::copy(fixture("blocksworld-p2.pddl"), dir.path().join("p2.pddl")).unwrap();
    let plan = dir.path().join("plan.json");
    let template = format!("sh {} {{domain}} {{problem}} {{planfile}}", mock.display());
    let write_plan = |first: &str| {
        let body = serde_json::json!({
            "planners": [{"id": "mock", "commandTemplate": template}],
            "domainVariants": [{"label": "input", "domain": first}],
            "problems": ["p2.pddl"],
            "limits": {"cutoffSeconds": 5, "memoryMegabytes": 1024, "repetitions": 1}
        });
        fs::write(&plan, body.to_string()).unwrap();
    };
    write_plan("bw.pddl");
    let out = dir.path().join("runs.jsonl");
    let run = domconf(&["bench", "run", plan.to_str().unwrap(), "-o", out.to_str().unwrap(), "--jobs", "1"]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8(run.stdout).unwrap().contains("mock,input,1,"));

    // the mock fails on a model that does not start with pick-up
    let reordered = ok(&["order", "--heuristic", "eff1", dir.path().join("bw.pddl").to_str().unwrap()]);
    fs::write(dir.path().join("eff1.pddl"), reordered).unwrap();
    write_plan("eff1.pddl");
    let out2 = dir.path().join("runs2.jsonl");
    let run = domconf(&["bench", "run", plan.to_str().unwrap(), "-o", out2.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(3));

    fs::write(&plan, "{").unwrap();
    let run = domconf(&["bench", "run", plan.to_str().unwrap(), "-o", out2.to_str().unwrap()]);
    assert_eq!(run.status.code(), Some(2));
}
