//! Criterion benchmarks for the learner live under `benches/`.
