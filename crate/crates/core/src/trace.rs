//! Per-step episode records and paired-run bookkeeping.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{ContextSummary, VehicleFeedback};
use crate::pipeline::{Decision, IntentDescriptor, MemoryStore, SafetyVerdict, StrategyProposal, UserRequest};
use crate::threats::{InjectionEffectRecord, LogEntry, ThreatError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub episode: u32,
    pub step: u32,
    /// Hash of everything scripted for this step (world, scripted request,
    /// user draw). Paired runs must agree on it.
    pub scripted_digest: String,
    pub request: UserRequest,
    pub context: ContextSummary,
    pub feedback: VehicleFeedback,
    /// Input ids available this step; justifications may only cite these.
    pub inputs: Vec<String>,
    pub rejected_messages: u32,
    pub intent: IntentDescriptor,
    pub proposal: StrategyProposal,
    pub verdicts: Vec<SafetyVerdict>,
    pub revised: Option<StrategyProposal>,
    pub approved: StrategyProposal,
}

impl StepRecord {
    pub fn decisions(&self) -> Vec<Decision> {
        self.verdicts.iter().map(|v| v.decision).collect()
    }

    pub fn verdict_label(&self) -> String {
        self.verdicts
            .iter()
            .map(|v| v.decision.as_str())
            .collect::<Vec<_>>()
            .join(">")
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("serializable")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub scenario_id: String,
    pub seed: u64,
    pub with_injections: bool,
    pub episodes: u32,
    pub steps_per_episode: u32,
    pub steps: Vec<StepRecord>,
    pub effects: Vec<InjectionEffectRecord>,
    pub log: Vec<LogEntry>,
    pub final_memory: MemoryStore,
}

impl EpisodeTrace {
    pub fn verdict_sequence(&self) -> Vec<Vec<Decision>> {
        self.steps.iter().map(StepRecord::decisions).collect()
    }

    pub fn approved_targets(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.approved.target_speed_kph).collect()
    }

    pub fn step(&self, episode: u32, step: u32) -> Option<&StepRecord> {
        self.steps.iter().find(|s| s.episode == episode && s.step == step)
    }

    /// Same scenario, same seed, same shape and identical scripted inputs.
    pub fn check_paired(&self, other: &EpisodeTrace) -> Result<(), ThreatError> {
        let unpaired = |why: String| Err(ThreatError::Unpaired(why));
        if self.scenario_id != other.scenario_id {
            return unpaired(format!("scenario `{}` vs `{}`", self.scenario_id, other.scenario_id));
        }
        if self.seed != other.seed {
            return unpaired(format!("seed {} vs {}", self.seed, other.seed));
        }
        if self.steps.len() != other.steps.len() {
            return unpaired(format!("{} vs {} steps", self.steps.len(), other.steps.len()));
        }
        for (a, b) in self.steps.iter().zip(&other.steps) {
            if (a.episode, a.step) != (b.episode, b.step) || a.scripted_digest != b.scripted_digest {
                return unpaired(format!(
                    "scripted inputs differ at episode {} step {}",
                    a.episode, a.step
                ));
            }
        }
        Ok(())
    }

    /// Index of the first step at which any injection changed state.
    pub fn first_effect_index(&self) -> Option<usize> {
        let first = self.effects.iter().find(|e| e.changed())?;
        self.steps
            .iter()
            .position(|s| (s.episode, s.step) >= (first.episode, first.step))
    }

    /// Episodes in which some injection took effect.
    pub fn injected_episodes(&self) -> Vec<u32> {
        let mut eps: Vec<u32> = self.effects.iter().filter(|e| e.changed()).map(|e| e.episode).collect();
        eps.dedup();
        eps
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}
