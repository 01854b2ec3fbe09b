//! Full acceptance suite: one line per criterion, then a single assertion.

use fracspec::validation::{run_checks, ValidationConfig};

#[test]
fn acceptance_criteria() {
    let results = run_checks(&ValidationConfig::default(), None);
    for r in &results {
        println!(
            "criterion {:>2} {:<34} {} ({:.1} s) {}",
            r.id,
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.seconds,
            r.detail
        );
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
