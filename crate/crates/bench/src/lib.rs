//! Criterion benchmarks for the swapbench pipeline live under `benches/`.
