//! Run a multi-stage chain and see which stage each behavioural change
//! is attributed to.

use agv_sim::chain::{resolve_builtin_chain, run_chain};
use agv_sim::harness::builtin_scenario;

fn main() {
    let id = std::env::args().nth(1).unwrap_or_else(|| "chain-1".into());
    let spec = resolve_builtin_chain(&id).expect("known chain id");
    let scenario = builtin_scenario(&spec.scenario).unwrap();
    let (trace, _baseline) = run_chain(&spec, &scenario, scenario.seed).unwrap();

    println!("{}: {}", spec.id, spec.description);
    for stage in &trace.stages {
        println!("  {:<36} first effect {:?}", stage.id, stage.first_effect);
    }
    for d in &trace.deltas {
        println!(
            "  step {} {:?}: {} -> {} ({})",
            d.step, d.field, d.baseline, d.attacked, d.stage
        );
    }
    println!("outcome {}, stealth {}", trace.outcome, trace.stealth);
}
