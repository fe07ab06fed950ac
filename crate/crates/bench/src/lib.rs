//! Benchmarks for the lar pipeline live in `benches/`.
