//! Poisoned memory injected once, in the first episode only. Stored as
//! persistent it keeps lowering the target afterwards; stored as
//! transient it is gone when the next episode starts.

use agv_sim::harness::{builtin_scenario, compare, run};

fn main() {
    for id in ["persistence-t1", "persistence-t1-transient"] {
        let config = builtin_scenario(id).unwrap();
        let report = compare(&run(&config, false).unwrap(), &run(&config, true).unwrap()).unwrap();
        println!(
            "{id}: {} later episode(s) still affected",
            report.summaries[0].persistence_episodes.unwrap()
        );
        for row in &report.rows {
            println!(
                "  episode {} step {}: delta {:+.1} kph",
                row.episode,
                row.step,
                row.delta_kph.unwrap()
            );
        }
    }
}
