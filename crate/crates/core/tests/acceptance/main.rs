//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.
//!
//! `ACCEPTANCE_ONLY=1,4,10` restricts the run to the listed criteria.

mod oracle;
mod scenarios;

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

pub struct Verdict {
    pub pass: bool,
    pub detail: String,
}

impl Verdict {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict {
            pass,
            detail: detail.into(),
        }
    }
}

/// Fails the verdict when the measured time exceeds `budget`.
pub fn within_budget(mut v: Verdict, elapsed: Duration, budget: Duration) -> Verdict {
    if elapsed > budget {
        v.pass = false;
        v.detail = format!("{}; runtime {:.1}s exceeds {:.0}s", v.detail, elapsed.as_secs_f64(), budget.as_secs_f64());
    }
    v
}

fn selected() -> Option<BTreeSet<usize>> {
    let raw = std::env::var("ACCEPTANCE_ONLY").ok()?;
    Some(raw.split(',').filter_map(|s| s.trim().parse().ok()).collect())
}

type Line = (usize, &'static str, Verdict, Duration);

fn wanted(only: &Option<BTreeSet<usize>>, c: usize) -> bool {
    only.as_ref().map_or(true, |s| s.contains(&c))
}

fn run(only: &Option<BTreeSet<usize>>, c: usize, name: &'static str, f: &mut dyn FnMut() -> Verdict, lines: &mut Vec<Line>) {
    if !wanted(only, c) {
        return;
    }
    eprintln!("[acceptance] criterion {c}: {name} ...");
    let start = Instant::now();
    let v = f();
    let elapsed = start.elapsed();
    eprintln!(
        "[acceptance] criterion {c}: {} in {:.1}s",
        if v.pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    lines.push((c, name, v, elapsed));
}

fn main() {
    let only = selected();
    let mut lines: Vec<Line> = Vec::new();

    run(&only, 1, "spectral exactness on single modes", &mut scenarios::spectral_exactness, &mut lines);
    run(&only, 2, "mean decay in a full nonlinear run", &mut scenarios::mean_decay, &mut lines);
    run(&only, 3, "linear damped transport", &mut scenarios::linear_damped_transport, &mut lines);
    run(&only, 4, "kernel and nonlinearity oracles", &mut scenarios::kernel_oracle, &mut lines);

    // The reference scenario feeds criteria 5, 6 and 7.
    let mut reference = scenarios::Reference::default();
    run(&only, 6, "blow-up contrast", &mut || reference.blowup(), &mut lines);
    run(&only, 7, "suppression sweep", &mut || reference.sweep(), &mut lines);
    if wanted(&only, 5) {
        if !wanted(&only, 6) {
            reference.blowup();
        }
        if !wanted(&only, 7) {
            reference.sweep();
        }
    }
    run(&only, 5, "maximum slope bound", &mut || reference.slope_bound(), &mut lines);

    run(&only, 8, "RAGE contrast", &mut scenarios::rage_contrast, &mut lines);
    run(&only, 9, "projected semigroup bound", &mut scenarios::semigroup_bound, &mut lines);
    run(&only, 10, "invariant property suites", &mut properties::run_all, &mut lines);

    lines.sort_by_key(|l| l.0);
    println!();
    let mut failed = 0;
    for (c, name, v, elapsed) in &lines {
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {c:>2} [{}] {name} ({:.1}s): {}",
            if v.pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            v.detail
        );
    }
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
