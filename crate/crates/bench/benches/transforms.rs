use std::fs;
use std::hint::black_box;
use std::path::Path;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use domconf::{
    apply_configuration, compose_chain, decode_precedence, order_operators, parse_domain,
    print_domain, random_configuration, space_size, MacroRecipe, PrecedenceVector,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DOMAINS: [&str; 4] = ["blocksworld", "parking", "depots", "rovers"];

fn fixture(name: &str) -> String {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name);
    fs::read_to_string(path).expect("fixture")
}

fn parse_print(c: &mut Criterion) {
    let mut g = c.benchmark_group("pddl");
    for name in DOMAINS {
        let text = fixture(&format!("{name}.pddl"));
        let model = parse_domain(&text).unwrap();
        g.bench_with_input(BenchmarkId::new("parse", name), &text, |b, t| {
            b.iter(|| parse_domain(black_box(t)).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("print", name), &model, |b, m| {
            b.iter(|| print_domain(black_box(m)))
        });
    }
    g.finish();
}

fn configure(c: &mut Criterion) {
    let mut g = c.benchmark_group("config");
    for name in DOMAINS {
        let d = parse_domain(&fixture(&format!("{name}.pddl"))).unwrap();
        let spec = random_configuration(&d, 1);
        let v = PrecedenceVector::uniform(&d, &mut ChaCha8Rng::seed_from_u64(1));
        g.bench_function(BenchmarkId::new("apply", name), |b| {
            b.iter(|| apply_configuration(black_box(&d), black_box(&spec)).unwrap())
        });
        g.bench_function(BenchmarkId::new("decode", name), |b| {
            b.iter(|| decode_precedence(black_box(&d), black_box(&v)).unwrap())
        });
        g.bench_function(BenchmarkId::new("space_size", name), |b| {
            b.iter(|| space_size(black_box(&d)))
        });
        g.bench_function(BenchmarkId::new("order_eff1", name), |b| {
            b.iter(|| order_operators(black_box(&d), "eff1".parse().unwrap()))
        });
    }
    g.finish();
}

fn compose(c: &mut Criterion) {
    let mut g = c.benchmark_group("macro");
    for (domain, recipe) in [
        ("blocksworld", "blocksworld-unstack-putdown"),
        ("depots", "depots-unload-drop"),
        ("satellite", "satellite-calibrate-image"),
    ] {
        let d = parse_domain(&fixture(&format!("{domain}.pddl"))).unwrap();
        let r: MacroRecipe = serde_json::from_str(&fixture(&format!("recipes/{recipe}.json"))).unwrap();
        g.bench_function(BenchmarkId::new("compose", recipe), |b| {
            b.iter(|| compose_chain(black_box(&r), black_box(&d)).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, parse_print, configure, compose);
criterion_main!(benches);
