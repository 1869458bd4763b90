//! End-to-end acceptance suite. Runs as a plain binary without the libtest
//! harness, so every criterion prints exactly one PASS/FAIL line straight to
//! stderr. Pass criterion numbers as arguments to run a subset.

mod exact;
mod learning;

use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use exact::*;
use learning::*;

type Outcome = (bool, String);

fn criteria() -> Vec<(u32, &'static str, fn() -> Outcome)> {
    vec![
        (1, "explanation selectivity", c01_selectivity),
        (2, "provision speedup", c02_provision_speedup),
        (3, "checkpoint age", c03_checkpoint_age),
        (4, "shuffled baseline ordering", c04_shuffled_ordering),
        (5, "threshold monotonicity", c05_threshold_monotonicity),
        (6, "online equals offline", c06_online_offline),
        (7, "frozen memories", c07_frozen_memories),
        (8, "gradient correctness", c08_gradients),
        (9, "dynamics oracles", c09_dynamics),
        (10, "Q-learning reduction", c10_q_learning_reduction),
        (11, "A2C transfer", c11_a2c_transfer),
    ]
}

fn main() {
    let wanted: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for (n, name, run) in criteria() {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            (false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        let verdict = if pass { "PASS" } else { "FAIL" };
        let secs = start.elapsed().as_secs_f64();
        writeln!(std::io::stderr(), "criterion {n:>2} {verdict} {name} ({secs:.1}s): {detail}").unwrap();
        if !pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        writeln!(std::io::stderr(), "failed criteria: {failed:?}").unwrap();
        std::process::exit(1);
    }
}
