//! Scenario files (TOML). Unknown keys, unknown enum values and illegal
//! threat/surface pairs are all rejected at load, with the offending field
//! and, for injections, the line it starts on.

use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::Spanned;

use super::HarnessError;
use crate::cav::WorldTruth;
use crate::chain::{resolve_builtin_chain, Outcome};
use crate::domain::{AgencyLevel, DrivingMode};
use crate::pipeline::{MemoryEntry, Rulebook, UserRequest};
use crate::threats::ThreatInjection;

/// What a shipped fixture is expected to produce; checked by the test suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    pub outcome: Outcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub id: String,
    #[serde(default)]
    pub description: String,
    pub mode: DrivingMode,
    pub agency: AgencyLevel,
    #[serde(default = "one")]
    pub episodes: u32,
    /// Steps per episode.
    #[serde(default = "one")]
    pub steps: u32,
    #[serde(default)]
    pub seed: u64,
    pub world: WorldTruth,
    #[serde(default)]
    pub rules: Rulebook,
    /// Scripted requests, cycled when shorter than the episode.
    pub requests: Vec<UserRequest>,
    /// Memory the personal agent starts the first episode with.
    #[serde(default)]
    pub memory: Vec<MemoryEntry>,
    #[serde(default)]
    pub injections: Vec<ThreatInjection>,
    /// Builtin chain ids whose injection stages are added to this scenario.
    #[serde(default)]
    pub chains: Vec<String>,
    #[serde(default)]
    pub expect: Option<Expectation>,
}

fn one() -> u32 {
    1
}

/// Same shape as `ScenarioConfig`, but keeps injection spans for error reporting.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    id: String,
    #[serde(default)]
    description: String,
    mode: DrivingMode,
    agency: AgencyLevel,
    #[serde(default = "one")]
    episodes: u32,
    #[serde(default = "one")]
    steps: u32,
    #[serde(default)]
    seed: u64,
    world: WorldTruth,
    #[serde(default)]
    rules: Rulebook,
    requests: Vec<UserRequest>,
    #[serde(default)]
    memory: Vec<MemoryEntry>,
    #[serde(default)]
    injections: Vec<Spanned<ThreatInjection>>,
    #[serde(default)]
    chains: Vec<String>,
    #[serde(default)]
    expect: Option<Expectation>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

impl ScenarioConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text, &path.display().to_string())
    }

    /// Parses and validates; `origin` names the source in error messages.
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, HarnessError> {
        let raw: RawScenario = toml::from_str(text).map_err(|e| HarnessError::Parse {
            origin: origin.to_string(),
            message: e.to_string().trim_end().to_string(),
        })?;
        for (i, inj) in raw.injections.iter().enumerate() {
            if let Err(e) = inj.get_ref().validate() {
                return Err(HarnessError::Invalid {
                    origin: format!("{origin}:{}", line_of(text, inj.span().start)),
                    field: format!("injections[{i}]"),
                    reason: e.to_string(),
                });
            }
        }
        let config = ScenarioConfig {
            id: raw.id,
            description: raw.description,
            mode: raw.mode,
            agency: raw.agency,
            episodes: raw.episodes,
            steps: raw.steps,
            seed: raw.seed,
            world: raw.world,
            rules: raw.rules,
            requests: raw.requests,
            memory: raw.memory,
            injections: raw.injections.into_iter().map(Spanned::into_inner).collect(),
            chains: raw.chains,
            expect: raw.expect,
        };
        config.validate(origin)?;
        Ok(config)
    }

    pub fn validate(&self, origin: &str) -> Result<(), HarnessError> {
        let invalid = |field: &str, reason: String| HarnessError::Invalid {
            origin: origin.to_string(),
            field: field.to_string(),
            reason,
        };
        if self.id.trim().is_empty() {
            return Err(invalid("id", "must not be empty".into()));
        }
        if self.episodes == 0 {
            return Err(invalid("episodes", "must be at least 1".into()));
        }
        self.world.validate().map_err(|e| invalid("world", e.to_string()))?;
        self.rules.validate().map_err(|e| invalid("rules", e))?;
        if self.requests.is_empty() {
            return Err(invalid("requests", "at least one request is required".into()));
        }
        for (i, r) in self.requests.iter().enumerate() {
            r.validate()
                .map_err(|e| invalid(&format!("requests[{i}]"), e.to_string()))?;
        }
        for (i, inj) in self.injections.iter().enumerate() {
            let field = format!("injections[{i}]");
            inj.validate().map_err(|e| invalid(&field, e.to_string()))?;
            if inj.episode >= self.episodes {
                return Err(invalid(
                    &field,
                    format!(
                        "episode {} but the scenario has {} episode(s)",
                        inj.episode, self.episodes
                    ),
                ));
            }
        }
        for (i, c) in self.chains.iter().enumerate() {
            if resolve_builtin_chain(c).is_none() {
                return Err(invalid(&format!("chains[{i}]"), format!("unknown chain `{c}`")));
            }
        }
        Ok(())
    }

    /// Same scenario with every injection and chain reference removed.
    pub fn without_injections(&self) -> Self {
        Self {
            injections: vec![],
            chains: vec![],
            ..self.clone()
        }
    }
}
