//! Criterion benchmarks for the `meanking` library; see `benches/`.
