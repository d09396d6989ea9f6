//! Acceptance run: one line per criterion, non-zero exit on any failure.
//!
//! `ACCEPTANCE_SEED` overrides the seed; `ACCEPTANCE_SUITES` (comma-separated)
//! restricts the run; `ACCEPTANCE_VERBOSE=1` prints every check.

use std::process::ExitCode;

use curvatur::verify::{run_suite, Check, SUITES};

fn main() -> ExitCode {
    let seed = std::env::var("ACCEPTANCE_SEED").ok().and_then(|s| s.parse().ok()).unwrap_or(2024);
    let only: Option<Vec<String>> = std::env::var("ACCEPTANCE_SUITES")
        .ok()
        .map(|s| s.split(',').map(|x| x.trim().to_string()).collect());
    let verbose = std::env::var("ACCEPTANCE_VERBOSE").is_ok_and(|v| v == "1");
    let mut failed = 0;
    for info in SUITES {
        if only.as_ref().is_some_and(|o| !o.iter().any(|n| n == info.name)) {
            continue;
        }
        let mut report = run_suite(info.name, seed).expect("known suite");
        if let Some(limit) = info.time_limit {
            let c = Check::at_most("runtime [s]", report.seconds, limit);
            report.passed &= c.passed;
            report.checks.push(c);
        }
        let status = if report.passed { "PASS" } else { "FAIL" };
        let worst = report
            .worst()
            .map(|c| format!("worst {:.3e} / tol {:.1e} ({})", c.measured, c.tolerance, c.name))
            .unwrap_or_default();
        println!(
            "[{status}] criterion {:>2} {:<16} {:>7.2}s  {}",
            info.criterion, info.name, report.seconds, worst
        );
        for c in &report.checks {
            if verbose || !c.passed {
                let mark = if c.passed { "ok  " } else { "FAIL" };
                let rel = if c.lower_bound { ">" } else { "≤" };
                let detail = c.detail.as_deref().map(|d| format!("  [{d}]")).unwrap_or_default();
                println!("       {mark} {}: {:.3e} ({rel} {:.1e}){detail}", c.name, c.measured, c.tolerance);
            }
        }
        if !report.passed {
            failed += 1;
        }
    }
    println!("acceptance: {failed} criteria failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
