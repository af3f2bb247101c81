use agv_sim::chain::{builtin_chains, resolve_builtin_chain, run_chain, Outcome};
use agv_sim::domain::ThreatId;
use agv_sim::harness::{builtin_scenario, builtin_scenarios, compare, run, ScenarioConfig};
use agv_sim::pipeline::Decision;
use agv_sim::threats::{injector, legal_surfaces, REGISTRY};

const CASE_ONE: [&str; 8] = [
    "case1-highway-routine",
    "case1-highway-urgent",
    "case1-arterial-routine",
    "case1-arterial-urgent",
    "case1-ringroad-routine",
    "case1-ringroad-urgent",
    "case1-residential-routine",
    "case1-residential-urgent",
];

const CASE_TWO: [&str; 4] = [
    "case2-highway-routine",
    "case2-highway-urgent",
    "case2-arterial-routine",
    "case2-ringroad-urgent",
];

#[test]
fn memory_cap_bounds_every_attacked_target() {
    for id in CASE_ONE {
        let c = builtin_scenario(id).unwrap();
        let b = run(&c, false).unwrap();
        let a = run(&c, true).unwrap();
        assert!(
            a.approved_targets().iter().all(|t| *t <= 45.0),
            "{id}: {:?}",
            a.approved_targets()
        );
        assert_eq!(b.verdict_sequence(), a.verdict_sequence(), "{id}");
        if id.contains("highway") || id.contains("arterial") {
            assert!(b.approved_targets().iter().all(|t| (80.0..=90.0).contains(t)), "{id}");
            let r = compare(&b, &a).unwrap();
            assert!(r
                .rows
                .iter()
                .all(|row| row.delta_kph.unwrap() < 0.0 && row.stealth == Some(true)));
        }
    }
}

#[test]
fn non_residential_baselines_sit_in_the_typical_band() {
    for id in CASE_ONE.iter().filter(|id| !id.contains("residential")) {
        let b = run(&builtin_scenario(id).unwrap(), false).unwrap();
        assert!(
            b.approved_targets()
                .iter()
                .all(|t| (80.0..=90.0).contains(t) && *t > 45.0),
            "{id}"
        );
    }
}

#[test]
fn spoofed_limit_bounds_targets_and_stays_stealthy() {
    for id in CASE_TWO {
        let c = builtin_scenario(id).unwrap();
        let world = c.world.clone();
        let b = run(&c, false).unwrap();
        let a = run(&c, true).unwrap();
        assert!(a.approved_targets().iter().all(|t| *t <= 40.0), "{id}");
        let r = compare(&b, &a).unwrap();
        assert_eq!(r.summaries[0].stealth, Some(true), "{id}");
        assert_eq!(c.world, world);
        assert!((80.0..=90.0).contains(&world.true_speed_limit_kph));
        // the agents believed the spoof; the baseline saw the truth
        assert!(a.steps.iter().all(|s| s.context.speed_limit_kph == 40.0));
        assert!(b
            .steps
            .iter()
            .all(|s| s.context.speed_limit_kph == world.true_speed_limit_kph));
    }
}

fn fixtures_for(threat: ThreatId) -> Vec<ScenarioConfig> {
    builtin_scenarios()
        .into_iter()
        .filter(|c| c.expect.is_some() && c.injections.iter().any(|i| i.threat == threat))
        .collect()
}

#[test]
fn every_threat_has_an_injector_and_a_passing_fixture() {
    assert_eq!(REGISTRY.len(), ThreatId::ALL.len());
    for threat in ThreatId::ALL {
        let inj = injector(threat);
        assert_eq!(inj.threat, threat);
        assert!(!legal_surfaces(threat).is_empty(), "{threat}");
        let fixtures = fixtures_for(threat);
        assert!(!fixtures.is_empty(), "no fixture exercises {threat}");
        for c in fixtures {
            for i in c.injections.iter().filter(|i| i.threat == threat) {
                assert_eq!(i.payload.kind(), inj.payload_kind, "{}", c.id);
            }
            let b = run(&c, false).unwrap();
            let a = run(&c, true).unwrap();
            assert!(
                a.effects.iter().any(|e| e.threat == threat && e.changed()),
                "{}: {threat} never changed state",
                c.id
            );
            let got = compare(&b, &a).unwrap().summaries[0].outcome.unwrap();
            assert_eq!(got, c.expect.as_ref().unwrap().outcome, "{}", c.id);
        }
    }
}

#[test]
fn log_tampering_leaves_an_attribution_gap() {
    let c = builtin_scenario("cov-t8").unwrap();
    let b = run(&c, false).unwrap();
    let a = run(&c, true).unwrap();
    assert_eq!(agv_sim::threats::attribution_gaps(&b.log), 0);
    assert!(agv_sim::threats::attribution_gaps(&a.log) > 0);
}

#[test]
fn persistent_poison_outlives_its_window() {
    let persistent = builtin_scenario("persistence-t1").unwrap();
    let transient = builtin_scenario("persistence-t1-transient").unwrap();
    let p = compare(&run(&persistent, false).unwrap(), &run(&persistent, true).unwrap()).unwrap();
    let t = compare(&run(&transient, false).unwrap(), &run(&transient, true).unwrap()).unwrap();
    assert_eq!(p.summaries[0].persistence_episodes, Some(persistent.episodes - 1));
    assert_eq!(t.summaries[0].persistence_episodes, Some(0));
    for row in t.rows.iter().filter(|r| r.episode > 0) {
        assert_eq!(row.delta_kph, Some(0.0));
    }
    for row in p.rows.iter().filter(|r| r.episode > 0) {
        assert!(row.delta_kph.unwrap() < 0.0);
    }
}

#[test]
fn semantic_threats_pass_the_check_without_any_revision() {
    for id in ["cov-t1", "cov-t6", "cov-t7"] {
        let c = builtin_scenario(id).unwrap();
        let a = run(&c, true).unwrap();
        for s in &a.steps {
            assert_eq!(s.decisions(), vec![Decision::Approve], "{id}");
            assert!(s.approved.target_speed_kph <= c.world.true_speed_limit_kph, "{id}");
            assert!(s.approved.headway_s >= c.rules.min_headway_s, "{id}");
        }
    }
}

#[test]
fn rogue_strategy_is_blocked() {
    let c = builtin_scenario("cov-t13").unwrap();
    let a = run(&c, true).unwrap();
    for s in &a.steps {
        assert_eq!(s.decisions(), vec![Decision::Revise, Decision::Substitute]);
        assert!(s.approved.target_speed_kph <= c.world.true_speed_limit_kph);
    }
}

#[test]
fn shipped_chains_classify_as_expected() {
    let chains = builtin_chains();
    assert_eq!(chains.len(), 6);
    for spec in &chains {
        let scenario = builtin_scenario(&spec.scenario).unwrap();
        let (trace, _) = run_chain(spec, &scenario, scenario.seed).unwrap();
        assert_eq!(trace.outcome, Outcome::MisalignedApproved, "{}", spec.id);
        assert!(trace.stealth, "{}", spec.id);
        assert!(!trace.deltas.is_empty(), "{}", spec.id);
        assert!(trace.deltas.iter().all(|d| d.stage != "unattributed"), "{}", spec.id);
    }
    for (id, want) in [("empty", Outcome::NoEffect), ("target-150", Outcome::BlockedBySc)] {
        let spec = resolve_builtin_chain(id).unwrap();
        let scenario = builtin_scenario(&spec.scenario).unwrap();
        assert_eq!(run_chain(&spec, &scenario, 7).unwrap().0.outcome, want, "{id}");
    }
}

#[test]
fn chain_observations_fire_in_order() {
    for spec in builtin_chains() {
        let scenario = builtin_scenario(&spec.scenario).unwrap();
        let (trace, _) = run_chain(&spec, &scenario, scenario.seed).unwrap();
        let firsts: Vec<_> = trace.stages.iter().map(|s| s.first_effect).collect();
        assert!(firsts.iter().all(Option::is_some), "{}: {:?}", spec.id, trace.stages);
        assert!(firsts.windows(2).all(|w| w[0] <= w[1]), "{}", spec.id);
    }
}

#[test]
fn readme_scenario_example_loads() {
    let readme = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../README.md")).unwrap();
    let start = readme.find("```toml\nid = \"case1-highway-routine\"").expect("scenario block") + "```toml\n".len();
    let block = &readme[start..start + readme[start..].find("```").unwrap()];
    let c = ScenarioConfig::from_toml(block, "README").unwrap();
    assert_eq!(c.injections.len(), 1);
    assert_eq!(c.memory.len(), 1);
    assert_eq!(c.chains, ["chain-1"]);
    run(&c, true).unwrap();
}
