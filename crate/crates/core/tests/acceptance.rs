//! Runs the ten acceptance criteria and prints one line per criterion.
//!
//! `cargo test -p psapprox --test acceptance`; pass criterion numbers as
//! arguments to run a subset.

use std::process::ExitCode;
use std::time::Instant;

use psapprox::suite;

fn main() -> ExitCode {
    let picked: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let ids: Vec<u8> = if picked.is_empty() { (1..=10).collect() } else { picked };
    let mut failed = 0;
    for id in &ids {
        let start = Instant::now();
        let Some(c) = suite::run(*id) else {
            println!("FAIL {id:>2} unknown criterion");
            failed += 1;
            continue;
        };
        println!("{} ({:.2}s)", c.line(), start.elapsed().as_secs_f64());
        if !c.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", ids.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
