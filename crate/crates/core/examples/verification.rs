//! Runs one verification suite (default `transport`) and prints each check.
//! `cargo run --release --example verification -- all` runs everything.

use curvatur::verify::{run_suite, suite_names};

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "transport".into());
    let names = if which == "all" { suite_names() } else { vec![which.as_str()] };
    for name in names {
        let Some(r) = run_suite(name, 2024) else {
            eprintln!("unknown suite `{name}`; known: {}", suite_names().join(", "));
            std::process::exit(2);
        };
        println!("{} ({}): {}", r.suite, r.title, if r.passed { "pass" } else { "FAIL" });
        for c in &r.checks {
            println!("  {} {}: {:.3e} vs {:.1e}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.measured, c.tolerance);
        }
    }
}
