//! The safety check on its own: approve, revise, then substitute.

use agv_sim::domain::{RoadClass, VehicleFeedback};
use agv_sim::pipeline::{sc_validate, ClaimedContext, Justification, LaneChange, Lineage, Rulebook, StrategyProposal};

fn proposal(target: f64, headway: f64) -> StrategyProposal {
    StrategyProposal {
        target_speed_kph: target,
        headway_s: headway,
        lane_change_intent: LaneChange::None,
        route_pref: "direct:office".into(),
        justification: vec![Justification {
            input: "s0/intent/desired".into(),
            rule: "example".into(),
        }],
    }
}

fn main() {
    let rules = Rulebook::default();
    let feedback = VehicleFeedback::new(80.0, 0.0, 0.0, 0.0, "odometry").unwrap();
    let claimed = ClaimedContext {
        speed_limit_kph: 90.0,
        road_class: RoadClass::Highway,
    };

    for (target, headway) in [(85.0, 2.0), (150.0, 2.0), (85.0, 0.4)] {
        let p = proposal(target, headway);
        let first = sc_validate(&p, &feedback, &rules, &claimed, Lineage::FIRST);
        println!(
            "{target} kph / {headway} s: {:?} {:?}",
            first.decision,
            first.reason.map(|r| r.id())
        );
        // A second offence in the same step is replaced by a clamped plan.
        let second = sc_validate(&p, &feedback, &rules, &claimed, Lineage::FIRST.next());
        if let Some(sub) = second.substitute {
            println!(
                "  then {:?}: {} kph, {} s headway",
                second.decision, sub.target_speed_kph, sub.headway_s
            );
        }
    }

    // The check only sees the claimed limit. A spoofed 40 passes 40.
    let spoofed = ClaimedContext {
        speed_limit_kph: 40.0,
        road_class: RoadClass::Highway,
    };
    let v = sc_validate(&proposal(40.0, 2.0), &feedback, &rules, &spoofed, Lineage::FIRST);
    println!("40 kph under a spoofed 40 limit: {:?}", v.decision);
}
