//! Benchmark-only crate; see `benches/controllers.rs`.
