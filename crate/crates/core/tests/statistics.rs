mod common;

use std::collections::BTreeSet;

use domconf::bench::{randomized_protocol, Clock, FailureKind};
use domconf::report::{bootstrap_par10, wilcoxon_with};
use domconf::{derive_seed, random_configuration, space_size, RunRecord};
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two-sided p-value by listing every sign assignment of the ranks.
fn brute_force_p(diffs: &[f64]) -> f64 {
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks: Vec<f64> = abs
        .iter()
        .map(|a| {
            let below = abs.iter().filter(|b| *b < a).count() as f64;
            let equal = abs.iter().filter(|b| *b == a).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let total: f64 = ranks.iter().sum();
    let observed = w_plus.min(total - w_plus);
    let mut at_most = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed + 1e-9 {
            at_most += 1;
        }
    }
    (2.0 * at_most as f64 / (1u64 << n) as f64).min(1.0)
}

#[test]
fn exact_path_matches_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..60 {
        let n = rng.random_range(1..=12);
        // small integers so ties are common
        let diffs: Vec<f64> = (0..n)
            .map(|_| {
                let v = rng.random_range(1..=6) as f64;
                if rng.random_bool(0.5) { v } else { -v }
            })
            .collect();
        let r = wilcoxon_with(&diffs, 0.05, true);
        let expected = brute_force_p(&diffs);
        assert!((r.p_value.unwrap() - expected).abs() < 1e-12, "{diffs:?}");
    }
    assert_eq!(wilcoxon_with(&[1.0, 2.0, 3.0], 0.05, true).p_value, Some(0.25));
}

#[test]
fn exact_and_normal_paths_agree_for_moderate_samples() {
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(15..=25);
        let shift = rng.random_range(-0.5..0.5);
        let diffs: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0) + shift).collect();
        let exact = wilcoxon_with(&diffs, 0.05, true).p_value.unwrap();
        let normal = wilcoxon_with(&diffs, 0.05, false).p_value.unwrap();
        worst = worst.max((exact - normal).abs());
    }
    assert!(worst < 0.02, "largest gap {worst}");
}

fn rec(problem: &str, config: &str, time: Option<f64>) -> RunRecord {
    RunRecord {
        planner_id: "p".into(),
        variant: config.into(),
        domain_file_digest: "d".into(),
        problem_id: problem.into(),
        config_digest: config.into(),
        run_index: 0,
        solved: time.is_some(),
        time_seconds: time.unwrap_or(60.0),
        failure_kind: if time.is_some() { FailureKind::None } else { FailureKind::Timeout },
        plan_length: None,
        clock: Clock::Cpu,
        cutoff_seconds: 60.0,
        plan_file: None,
        detail: None,
    }
}

fn synthetic() -> Vec<RunRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut out = Vec::new();
    for p in 0..20 {
        for c in 0..5 {
            let t = rng.random_range(0.5..50.0);
            let solved = rng.random_bool(0.85);
            out.push(rec(&format!("p{p}"), &format!("c{c}"), solved.then_some(t)));
        }
    }
    out
}

#[test]
fn bootstrap_median_converges() {
    let rs = synthetic();
    let a = bootstrap_par10(&rs, 2000, 1).unwrap()[0].median;
    let b = bootstrap_par10(&rs, 4000, 1).unwrap()[0].median;
    assert!(((a - b) / a).abs() < 0.01, "{a} vs {b}");
}

#[test]
fn bootstrap_ignores_thread_count() {
    let rs = synthetic();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| bootstrap_par10(&rs, 100, 3).unwrap())
    };
    assert_eq!(run(1), run(8));
}

#[test]
fn randomized_assignment_is_reproducible_and_order_free() {
    let d = common::domain("blocksworld.pddl");
    let ids: Vec<String> = (1..=20).map(|i| format!("probBLOCKS-{i}")).collect();
    let a = randomized_protocol(&d, &ids, 42);
    assert_eq!(a, randomized_protocol(&d, &ids, 42));
    let mut reversed = ids.clone();
    reversed.reverse();
    let mut b = randomized_protocol(&d, &reversed, 42);
    b.reverse();
    assert_eq!(a, b);
    let distinct: BTreeSet<_> = a.iter().map(|(_, c)| c.digest()).collect();
    assert_eq!(distinct.len(), 20);
    // chance of any collision among 20 draws is below 190 / |space|
    assert!(space_size(&d) > BigUint::from(190u32) * BigUint::from(1_000_000_000u64));
    let one = randomized_protocol(&d, &ids[..1], 42);
    assert_eq!(one[0].1, random_configuration(&d, derive_seed(42, &ids[0])));
}
