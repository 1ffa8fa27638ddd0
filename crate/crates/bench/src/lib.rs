//! Criterion benchmarks for refldiff-core; see `benches/`.
