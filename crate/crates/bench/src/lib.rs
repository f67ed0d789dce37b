//! Criterion benchmarks for the two-grid solver; see `benches/`.
