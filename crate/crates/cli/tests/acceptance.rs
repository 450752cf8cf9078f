//! Full acceptance suite at the stated ensemble sizes and tolerances.
//! Prints one pass/fail line per criterion straight to stderr, so the lines
//! show up even under the default output capture.

use std::io::Write;

use smalltime_cli::accept::{run_criteria, write_report_csv};
use smalltime_cli::Suite;
use smalltime_core::heat::apply_heat;

#[test]
fn acceptance_a1_to_a12() {
    let report = |line: String| {
        let _ = writeln!(std::io::stderr(), "{line}");
    };
    let rows = run_criteria(Suite::Full, apply_heat, |row| report(row.line()));
    assert_eq!(rows.len(), 12);
    let total: f64 = rows.iter().map(|r| r.seconds).sum();
    report(format!("acceptance total {total:.1} s"));
    let mut csv = Vec::new();
    write_report_csv(&rows, &mut csv).unwrap();
    let failed: Vec<&str> = rows.iter().filter(|r| !r.pass).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}\n{}", String::from_utf8_lossy(&csv));
}
