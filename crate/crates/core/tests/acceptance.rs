//! Prints one PASS/FAIL line per acceptance criterion.
//!
//! `ISING_LAB_ACCEPT=A3,A8` restricts the run to a subset.

use ising_lab::acceptance::{run_criterion, AcceptanceOptions, CRITERIA};

fn main() {
    // libtest flags such as --nocapture or a name filter are accepted and ignored
    let selected: Vec<String> = match std::env::var("ISING_LAB_ACCEPT") {
        Ok(list) => list.split(',').map(|s| s.trim().to_uppercase()).filter(|s| !s.is_empty()).collect(),
        Err(_) => CRITERIA.iter().map(|s| s.to_string()).collect(),
    };
    let opts = AcceptanceOptions::default();
    let mut failed = Vec::new();
    for id in &selected {
        match run_criterion(id, &opts) {
            Ok(v) => {
                println!("{}", v.line());
                if !v.pass {
                    failed.push(id.clone());
                }
            }
            Err(e) => {
                println!("{id:<4} FAIL error: {e}");
                failed.push(id.clone());
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", selected.len() - failed.len(), selected.len());
    if !failed.is_empty() {
        println!("failed: {}", failed.join(", "));
    }
}
