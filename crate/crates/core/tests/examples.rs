//! `cargo test` builds the examples; make sure each one also runs cleanly.

use std::path::PathBuf;
use std::process::Command;

const EXAMPLES: [&str; 10] = [
    "attack_chain",
    "custom_scenario",
    "memory_poisoning",
    "message_trust",
    "persistence",
    "safety_check",
    "severity_score",
    "threat_catalog",
    "v2x_spoofing",
    "validate_tables",
];

fn example_path(name: &str) -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|deps| deps.parent()).unwrap();
    profile_dir
        .join("examples")
        .join(format!("{name}{}", std::env::consts::EXE_SUFFIX))
}

#[test]
fn every_example_is_listed() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("examples");
    let mut found: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path().file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    found.sort();
    assert_eq!(found, EXAMPLES);
}

#[test]
fn examples_run_successfully() {
    for name in EXAMPLES {
        let path = example_path(name);
        let out = Command::new(&path)
            .output()
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert!(out.status.success(), "{name}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stdout.is_empty(), "{name} printed nothing");
    }
}
