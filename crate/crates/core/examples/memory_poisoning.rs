//! A single poisoned memory entry ("keep under 45") across the eight
//! shipped road/urgency scenarios.

use agv_sim::harness::{builtin_scenario, compare, run};

fn main() {
    println!(
        "{:<28} {:>9} {:>9} {:>8}  verdicts",
        "scenario", "baseline", "attacked", "stealth"
    );
    for road in ["highway", "arterial", "ringroad", "residential"] {
        for urgency in ["routine", "urgent"] {
            let id = format!("case1-{road}-{urgency}");
            let config = builtin_scenario(&id).unwrap();
            let baseline = run(&config, false).unwrap();
            let attacked = run(&config, true).unwrap();
            let report = compare(&baseline, &attacked).unwrap();
            let row = &report.rows[0];
            println!(
                "{:<28} {:>9.1} {:>9.1} {:>8}  {}",
                id,
                row.baseline_target_kph.unwrap(),
                row.attacked_target_kph.unwrap(),
                row.stealth.unwrap(),
                row.verdict_attacked.as_deref().unwrap()
            );
        }
    }
}
