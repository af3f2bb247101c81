//! Recompute every printed cell and report where totals or bands disagree.

use agv_sim::severity::{escalation_violations, records, validate_tables};

fn main() {
    let found = validate_tables();
    for d in &found {
        println!("{d}");
    }
    println!("{} of {} cells inconsistent", found.len(), records().len());

    let totals_only = found.iter().filter(|d| d.total_mismatch()).count();
    println!(
        "{totals_only} with a wrong sum, {} with only a wrong colour",
        found.len() - totals_only
    );

    for v in escalation_violations() {
        println!(
            "{} scores lower autonomous ({}) than manual ({}) at {} agency",
            v.threat, v.autonomous_total, v.manual_total, v.agency
        );
    }
}
