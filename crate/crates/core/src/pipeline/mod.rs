//! The agentic pipeline: Personal Agent -> Driving Strategy Agent -> Safety Check,
//! with one revision round before the check substitutes its own proposal.

pub mod memory;
pub mod personal;
pub mod safety;
pub mod strategy;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ContextSummary, DomainError, VehicleFeedback};
pub use memory::{MemoryEntry, MemoryKind, MemoryStore, MemoryValue};
pub use personal::{pa_interpret, IntentDescriptor, IntentPatch, PersonalAgent, Urgency, UserRequest};
pub use safety::{
    clamp_to_rules, first_violation, sc_validate, ClaimedContext, Decision, Lineage, Rulebook, SafetyRule,
    SafetyVerdict,
};
pub use strategy::{
    dsa_propose, DrivingStrategyAgent, Justification, LaneChange, PreferenceWeights, SpeedSelection, StrategyProposal,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("invalid context: {0}")]
    InvalidContext(DomainError),
}

/// Trace id of one per-step input, e.g. `s3/context/speed_limit`.
pub fn input_id(step: u32, path: &str) -> String {
    format!("s{step}/{path}")
}

/// Calibration constants shared by both agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentConfig {
    pub routine_speed_factor: f64,
    pub hazard_factor: f64,
    pub hazard_radius_m: f64,
    pub hazard_min_confidence: f64,
    pub headway_base_s: f64,
    pub hard_braking_threshold: f64,
    pub degraded_profile_factor: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            routine_speed_factor: 0.9,
            hazard_factor: 0.5,
            hazard_radius_m: 100.0,
            hazard_min_confidence: 0.5,
            headway_base_s: 1.0,
            hard_braking_threshold: 0.5,
            degraded_profile_factor: 0.8,
        }
    }
}

impl AgentConfig {
    pub const FIELDS: [&'static str; 7] = [
        "routine_speed_factor",
        "hazard_factor",
        "hazard_radius_m",
        "hazard_min_confidence",
        "headway_base_s",
        "hard_braking_threshold",
        "degraded_profile_factor",
    ];

    pub fn field_mut(&mut self, name: &str) -> Option<&mut f64> {
        Some(match name {
            "routine_speed_factor" => &mut self.routine_speed_factor,
            "hazard_factor" => &mut self.hazard_factor,
            "hazard_radius_m" => &mut self.hazard_radius_m,
            "hazard_min_confidence" => &mut self.hazard_min_confidence,
            "headway_base_s" => &mut self.headway_base_s,
            "hard_braking_threshold" => &mut self.hard_braking_threshold,
            "degraded_profile_factor" => &mut self.degraded_profile_factor,
            _ => return None,
        })
    }
}

/// Replacement speed policy installed by a rogue-agent injection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpeedOverride {
    Fixed { kph: f64 },
    Scale { factor: f64 },
}

impl SpeedOverride {
    pub fn apply(self, v: f64) -> f64 {
        match self {
            SpeedOverride::Fixed { kph } => kph,
            SpeedOverride::Scale { factor } => v * factor,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub intent: IntentDescriptor,
    pub proposal: StrategyProposal,
    /// Every verdict issued this step, in order.
    pub verdicts: Vec<SafetyVerdict>,
    pub revised: Option<StrategyProposal>,
    pub approved: StrategyProposal,
}

impl StepOutcome {
    pub fn final_verdict(&self) -> &SafetyVerdict {
        self.verdicts.last().expect("at least one verdict per step")
    }

    pub fn decisions(&self) -> Vec<Decision> {
        self.verdicts.iter().map(|v| v.decision).collect()
    }
}

/// Inputs to one pipeline step. The personal agent and the strategy agent
/// may see different context when an injection has split their views.
#[derive(Debug, Clone)]
pub struct StepInputs<'a> {
    pub step: u32,
    pub request: &'a UserRequest,
    pub memory: &'a MemoryStore,
    pub pa_context: &'a ContextSummary,
    pub dsa_context: &'a ContextSummary,
    pub feedback: &'a VehicleFeedback,
    pub intent_patches: &'a [(String, IntentPatch)],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub pa: PersonalAgent,
    pub dsa: DrivingStrategyAgent,
    pub rules: Rulebook,
}

impl Pipeline {
    pub fn new(rules: Rulebook) -> Self {
        Self {
            pa: PersonalAgent::default(),
            dsa: DrivingStrategyAgent::with_rules(&rules),
            rules,
        }
    }

    pub fn step(&self, inputs: StepInputs<'_>) -> Result<StepOutcome, PipelineError> {
        let StepInputs {
            step,
            request,
            memory,
            pa_context,
            dsa_context,
            feedback,
            intent_patches,
        } = inputs;
        dsa_context.validate().map_err(PipelineError::InvalidContext)?;

        let mut intent = self.pa.interpret(request, memory, pa_context)?;
        for (source, patch) in intent_patches {
            patch.apply(&mut intent, source);
        }
        let proposal = self.dsa.propose(step, &intent, dsa_context, feedback);

        let claimed = ClaimedContext {
            speed_limit_kph: dsa_context.speed_limit_kph,
            road_class: dsa_context.road_class,
        };
        let first = sc_validate(&proposal, feedback, &self.rules, &claimed, Lineage::FIRST);
        let (verdicts, revised, approved) = match first.decision {
            Decision::Approve => (vec![first], None, proposal.clone()),
            _ => {
                let rule = first.reason.expect("revise carries a rule");
                let revised = self.dsa.revise(step, &proposal, rule, &self.rules, &claimed, feedback);
                let second = sc_validate(&revised, feedback, &self.rules, &claimed, Lineage::FIRST.next());
                let approved = match &second.substitute {
                    Some(sub) => sub.clone(),
                    None => revised.clone(),
                };
                (vec![first, second], Some(revised), approved)
            }
        };
        Ok(StepOutcome {
            intent,
            proposal,
            verdicts,
            revised,
            approved,
        })
    }
}

/// One pipeline step with default agents and a shared context view.
pub fn run_pipeline_step(
    request: &UserRequest,
    memory: &MemoryStore,
    context: &ContextSummary,
    feedback: &VehicleFeedback,
    rules: &Rulebook,
) -> Result<StepOutcome, PipelineError> {
    Pipeline::new(rules.clone()).step(StepInputs {
        step: 0,
        request,
        memory,
        pa_context: context,
        dsa_context: context,
        feedback,
        intent_patches: &[],
    })
}
