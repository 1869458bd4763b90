//! Criterion benchmarks for the `ctdl` hot paths live in `benches/`.
//! Run them with `cargo bench -p ctdl-bench`.
