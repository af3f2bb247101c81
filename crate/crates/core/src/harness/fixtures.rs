//! Scenario files shipped with the crate. `run` accepts either a path or
//! one of these names.

use std::path::Path;

use super::{HarnessError, ScenarioConfig};

macro_rules! scenarios {
    ($($name:literal),* $(,)?) => {
        &[$(($name, include_str!(concat!("../../scenarios/", $name, ".toml")))),*]
    };
}

const SCENARIOS: &[(&str, &str)] = scenarios![
    "case1-highway-routine",
    "case1-highway-urgent",
    "case1-arterial-routine",
    "case1-arterial-urgent",
    "case1-ringroad-routine",
    "case1-ringroad-urgent",
    "case1-residential-routine",
    "case1-residential-urgent",
    "case2-highway-routine",
    "case2-highway-urgent",
    "case2-arterial-routine",
    "case2-ringroad-urgent",
    "chain-base",
    "persistence-t1",
    "persistence-t1-transient",
    "cov-t1",
    "cov-t2",
    "cov-t3",
    "cov-t4",
    "cov-t5",
    "cov-t6",
    "cov-t7",
    "cov-t8",
    "cov-t9",
    "cov-t10",
    "cov-t11",
    "cov-t12",
    "cov-t13",
    "cov-t14",
    "cov-t15",
    "cov-xperception",
    "cov-xv2x",
    "cov-xcompute",
    "cov-xcontrolfeedback",
];

pub fn builtin_scenario_names() -> impl Iterator<Item = &'static str> {
    SCENARIOS.iter().map(|(n, _)| *n)
}

pub fn builtin_scenario_source(name: &str) -> Option<&'static str> {
    SCENARIOS.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn builtin_scenario(name: &str) -> Result<ScenarioConfig, HarnessError> {
    let text = builtin_scenario_source(name).ok_or_else(|| HarnessError::UnknownScenario(name.to_string()))?;
    ScenarioConfig::from_toml(text, &format!("builtin:{name}"))
}

/// Every shipped scenario, in listing order.
pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    builtin_scenario_names()
        .map(|n| builtin_scenario(n).expect("shipped scenarios are valid"))
        .collect()
}

/// A path to a scenario file if one exists, otherwise a builtin name.
pub fn resolve_scenario(name_or_path: &str) -> Result<ScenarioConfig, HarnessError> {
    let path = Path::new(name_or_path);
    if path.exists() {
        return ScenarioConfig::load(path);
    }
    let stem = name_or_path.strip_suffix(".toml").unwrap_or(name_or_path);
    match builtin_scenario_source(stem) {
        Some(_) => builtin_scenario(stem),
        None if name_or_path.ends_with(".toml") || name_or_path.contains('/') => Err(HarnessError::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        )),
        None => Err(HarnessError::UnknownScenario(name_or_path.to_string())),
    }
}
