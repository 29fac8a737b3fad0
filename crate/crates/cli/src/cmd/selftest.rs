use crate::failure::{Failure, Outcome};
use crate::report::Report;

pub fn run(report: &mut Report) -> Outcome {
    let checks = g4d_core::selftest::run();
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    for c in &checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        report.set(c.name, format!("{status} ({})", c.detail));
    }
    report.set("passed", checks.len() - failed.len());
    report.set("failed", failed.len());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Internal(format!("self-checks failed: {}", failed.join(", "))))
    }
}
