//! Criterion benchmarks for the solver and the simulator live under `benches/`.
