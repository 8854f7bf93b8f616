//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exits nonzero only when a criterion outside `KNOWN_FAILURES` fails, or a
//! known failure starts passing (so the list is kept honest).

use rgpt_cli::acceptance::{run_all, KNOWN_FAILURES};
use rgpt_cli::RunConfig;
use std::process::ExitCode;

fn main() -> ExitCode {
    let cfg = RunConfig::default_config();
    println!("acceptance suite, config_hash {}", cfg.hash());
    let report = run_all(&cfg, |r| println!("{r}"));
    let passed = report.results.iter().filter(|r| r.pass).count();
    println!("{passed}/{} criteria pass", report.results.len());
    let unexpected = report.unexpected_failures();
    let fixed: Vec<u8> = report
        .results
        .iter()
        .filter(|r| r.pass && KNOWN_FAILURES.contains(&r.id))
        .map(|r| r.id)
        .collect();
    if !unexpected.is_empty() {
        println!("unexpected failures: {unexpected:?}");
        return ExitCode::FAILURE;
    }
    if !fixed.is_empty() {
        println!("known failures now passing, update KNOWN_FAILURES: {fixed:?}");
        return ExitCode::FAILURE;
    }
    println!("known failures (documented): {KNOWN_FAILURES:?}");
    ExitCode::SUCCESS
}
