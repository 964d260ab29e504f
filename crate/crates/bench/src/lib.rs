//! Benchmark-only crate; executable benchmarks live in benches/.
