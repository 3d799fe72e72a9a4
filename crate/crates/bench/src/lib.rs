//! Criterion benchmarks for `paramid-core`; see `benches/`.
