//! Every threat with its injector and the surfaces it may target.

use agv_sim::domain::ThreatId;
use agv_sim::threats::{injector, legal_surfaces, Payload, Surface, ThreatInjection};

fn main() {
    for threat in ThreatId::ALL {
        let inj = injector(threat);
        let surfaces: Vec<String> = legal_surfaces(threat).iter().map(|s| s.to_string()).collect();
        println!("{:<17} {:<22} {:?}", threat.id(), inj.payload_kind, inj.phase);
        println!("    {} [{}]", inj.effect, surfaces.join(", "));
    }

    let wrong = ThreatInjection::new(
        ThreatId::T1,
        Surface::ToolOutput,
        Payload::MemoryInsert {
            key: "cap".into(),
            cap_kph: 45.0,
        },
    );
    println!("T1 on ToolOutput: {}", wrong.validate().unwrap_err());
}
