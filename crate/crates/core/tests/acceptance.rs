//! One line per acceptance criterion. Run with `--nocapture` to see them.

use levy_exit::validation::suites::{run_criterion, CriterionReport};

const SEED: u64 = 20_240_917;

fn print(report: &CriterionReport) {
    let verdict = if report.pass { "PASS" } else { "FAIL" };
    println!(
        "criterion {} {verdict}: {} ({:.1} s)",
        report.criterion, report.title, report.seconds
    );
    for check in &report.checks {
        println!("    {} {}", if check.pass { "ok  " } else { "FAIL" }, check.summary());
    }
    if let Some(e) = &report.error {
        println!("    error: {e}");
    }
}

#[test]
fn acceptance_criteria() {
    let reports: Vec<_> = (1..=9)
        .map(|c| {
            let r = run_criterion(c, SEED);
            print(&r);
            r
        })
        .collect();
    let failed: Vec<u8> = reports.iter().filter(|r| !r.pass).map(|r| r.criterion).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
