//! Look up a published severity cell and ask what-if questions about it.

use agv_sim::domain::{AgencyBucket, DrivingMode, ThreatId};
use agv_sim::severity::{lookup, what_if, Dimension, Rating};

fn main() {
    let cell = lookup(ThreatId::T1, DrivingMode::Autonomous, AgencyBucket::High).unwrap();
    let r = cell.ratings;
    println!(
        "Table {} T1: SI={} SD={} P={} SM={} -> {} {}",
        cell.table,
        r.si,
        r.sd,
        r.p,
        r.sm,
        r.total(),
        r.band()
    );

    // Same threat, but suppose persistence were only rated Low.
    let (total, band) = what_if(
        ThreatId::T1,
        DrivingMode::Autonomous,
        AgencyBucket::High,
        &[(Dimension::Persistence, Rating::L)],
    )
    .unwrap();
    println!("with P=L: {total} {band}");

    for mode in DrivingMode::ALL {
        let row: Vec<String> = AgencyBucket::ALL
            .iter()
            .map(|a| {
                let c = lookup(ThreatId::T7, mode, *a).unwrap();
                format!("{a}={} {}", c.ratings.total(), c.ratings.band())
            })
            .collect();
        println!("T7 {mode}: {}", row.join(", "));
    }
}
