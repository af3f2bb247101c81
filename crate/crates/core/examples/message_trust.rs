//! Admission is decided on who a message claims to come from. A forged
//! sender that happens to hold the right authority gets through.

use agv_sim::domain::{make_envelope, Authority, DelegationTable, Role};
use agv_sim::harness::{builtin_scenario, run};

fn main() {
    let table = DelegationTable::default();

    let honest = make_envelope(Role::External, Authority::ContextOnly, "closure R7", 0);
    println!(
        "External sending context: {:?}",
        table.admit(&honest).map_err(|e| e.to_string())
    );

    let mut forged = honest.clone();
    forged.claimed_sender = Role::CavStack;
    println!(
        "External posing as CavStack: {:?} (spoofed: {})",
        table.admit(&forged).map_err(|e| e.to_string()),
        forged.is_spoofed()
    );

    let config = builtin_scenario("cov-t9").unwrap();
    let attacked = run(&config, true).unwrap();
    for s in &attacked.steps {
        println!(
            "step {}: limit {} kph, target {} kph, rejected {}",
            s.step, s.context.speed_limit_kph, s.approved.target_speed_kph, s.rejected_messages
        );
    }
}
