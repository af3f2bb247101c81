//! A spoofed V2X speed-limit broadcast. The agents believe it, the safety
//! check approves the slowdown, and the world itself never changes.

use agv_sim::harness::{builtin_scenario, compare, run};

fn main() {
    for id in [
        "case2-highway-routine",
        "case2-highway-urgent",
        "case2-arterial-routine",
        "case2-ringroad-urgent",
    ] {
        let config = builtin_scenario(id).unwrap();
        let baseline = run(&config, false).unwrap();
        let attacked = run(&config, true).unwrap();
        let summary = compare(&baseline, &attacked).unwrap().summaries.remove(0);
        println!(
            "{id}: true limit {} kph, believed {} kph, target {} -> {} kph, stealth {}, outcome {}",
            config.world.true_speed_limit_kph,
            attacked.steps[0].context.speed_limit_kph,
            baseline.steps[0].approved.target_speed_kph,
            attacked.steps[0].approved.target_speed_kph,
            summary.stealth.unwrap(),
            summary.outcome.unwrap()
        );
    }
}
