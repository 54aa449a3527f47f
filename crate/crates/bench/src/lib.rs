//! Criterion benchmarks for the design pipeline and the simulator; see `benches/`.
