//! Criterion benchmarks for the lyapsync kernels; see `benches/`.
