//! Runner for the acceptance criteria: each criterion is a function returning an
//! [`Outcome`]; [`run`] prints one PASS/FAIL line per criterion.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome { pass, detail: detail.into() }
    }
}

pub struct Criterion {
    pub number: u32,
    pub name: &'static str,
    pub check: fn() -> Outcome,
}

/// Whether `elapsed` is under `limit_s` seconds, with a printable note.
pub fn within_time(elapsed: Duration, limit_s: f64) -> (bool, String) {
    let s = elapsed.as_secs_f64();
    (s < limit_s, format!("runtime {s:.1} s (limit {limit_s} s)"))
}

fn panic_message(e: Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}

/// Runs the criteria whose numbers are in `only` (all when empty) and returns the
/// number of failures. A panicking criterion counts as failed.
pub fn run(criteria: &[Criterion], only: &[u32]) -> usize {
    let mut failed = 0;
    for c in criteria.iter().filter(|c| only.is_empty() || only.contains(&c.number)) {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.check)).unwrap_or_else(|e| Outcome::new(false, format!("panicked: {}", panic_message(e))));
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} ({}): {} [{:.1} s]",
            if outcome.pass { "PASS" } else { "FAIL" },
            c.number,
            c.name,
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    failed
}
