//! Criterion benchmarks for domconf live under `benches/`.
