//! Personal Agent: turns user requests plus memory into abstract intent.
//! It never emits maneuver-level fields.

use serde::{Deserialize, Serialize};

use super::memory::MemoryStore;
use super::{input_id, AgentConfig, PipelineError, SpeedOverride};
use crate::domain::ContextSummary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Urgency {
    Routine,
    Urgent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UserRequest {
    #[serde(default)]
    pub desired_speed_kph: Option<f64>,
    pub urgency_tag: Urgency,
    pub destination: String,
}

impl UserRequest {
    pub fn routine(destination: impl Into<String>) -> Self {
        Self {
            desired_speed_kph: None,
            urgency_tag: Urgency::Routine,
            destination: destination.into(),
        }
    }

    pub fn urgent(destination: impl Into<String>) -> Self {
        Self {
            urgency_tag: Urgency::Urgent,
            ..Self::routine(destination)
        }
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        if let Some(v) = self.desired_speed_kph {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PipelineError::InvalidRequest(format!(
                    "desired_speed_kph must be positive, got {v}"
                )));
            }
        }
        if self.destination.trim().is_empty() {
            return Err(PipelineError::InvalidRequest("destination is empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntentDescriptor {
    pub desired_speed_kph: f64,
    pub urgency: f64,
    pub comfort_weight: f64,
    pub destination_tag: String,
    pub active_caps_kph: Vec<f64>,
    /// Memory keys the caps came from.
    pub derived_from: Vec<String>,
}

impl IntentDescriptor {
    pub fn effective_cap(&self) -> Option<f64> {
        self.active_caps_kph.iter().copied().reduce(f64::min)
    }
}

/// Intent-level instruction arriving over an admitted envelope.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntentPatch {
    #[serde(default)]
    pub desired_speed_kph: Option<f64>,
    #[serde(default)]
    pub add_cap_kph: Option<f64>,
}

impl IntentPatch {
    pub fn apply(&self, intent: &mut IntentDescriptor, source: &str) {
        if let Some(v) = self.desired_speed_kph {
            intent.desired_speed_kph = v;
        }
        if let Some(c) = self.add_cap_kph {
            intent.active_caps_kph.push(c);
            intent.derived_from.push(source.to_string());
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PersonalAgent {
    pub config: AgentConfig,
    /// Installed only by a rogue-agent injection.
    pub rogue: Option<SpeedOverride>,
}

impl PersonalAgent {
    pub fn interpret(
        &self,
        request: &UserRequest,
        memory: &MemoryStore,
        context: &ContextSummary,
    ) -> Result<IntentDescriptor, PipelineError> {
        request.validate()?;
        context.validate().map_err(PipelineError::InvalidContext)?;

        let limit = context.speed_limit_kph;
        let mut desired = match (request.desired_speed_kph, request.urgency_tag) {
            (Some(v), _) => v,
            (None, Urgency::Urgent) => limit,
            (None, Urgency::Routine) => {
                let rounded = (self.config.routine_speed_factor * limit).round();
                // tiny limits would round to zero
                if rounded >= 1.0 {
                    rounded
                } else {
                    limit
                }
            }
        };
        if let Some(rogue) = self.rogue {
            desired = rogue.apply(desired);
        }

        let caps = memory.speed_caps();
        let urgency = match request.urgency_tag {
            Urgency::Urgent => 1.0,
            Urgency::Routine => 0.4,
        };
        Ok(IntentDescriptor {
            desired_speed_kph: desired,
            urgency,
            comfort_weight: 1.0 - urgency,
            destination_tag: request.destination.clone(),
            active_caps_kph: caps.iter().map(|(_, c)| *c).collect(),
            derived_from: caps.iter().map(|(k, _)| format!("memory:{k}")).collect(),
        })
    }
}

/// Default-configured personal agent.
pub fn pa_interpret(
    request: &UserRequest,
    memory: &MemoryStore,
    context: &ContextSummary,
) -> Result<IntentDescriptor, PipelineError> {
    PersonalAgent::default().interpret(request, memory, context)
}

/// Trace ids of the intent fields, cited by the strategy agent.
pub fn intent_input_ids(step: u32) -> [String; 2] {
    [input_id(step, "intent/desired"), input_id(step, "intent/caps")]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Role;
    use crate::pipeline::memory::MemoryEntry;
    use crate::pipeline::tests::context;

    #[test]
    fn routine_uses_ninety_percent_of_limit() {
        let intent = pa_interpret(&UserRequest::routine("work"), &MemoryStore::new(), &context(100.0)).unwrap();
        assert_eq!(intent.desired_speed_kph, 90.0);
        assert!(intent.active_caps_kph.is_empty());
        assert_eq!(intent.urgency, 0.4);
    }

    #[test]
    fn urgent_uses_limit_and_reports_caps() {
        let mem = MemoryStore::from_entries([MemoryEntry::speed_cap("poison", 45.0, Role::External, 0, true)]);
        let intent = pa_interpret(&UserRequest::urgent("clinic"), &mem, &context(80.0)).unwrap();
        assert_eq!(intent.desired_speed_kph, 80.0);
        assert_eq!(intent.active_caps_kph, vec![45.0]);
        assert_eq!(intent.derived_from, vec!["memory:poison".to_string()]);
        assert_eq!(intent.urgency, 1.0);
    }

    #[test]
    fn two_caps_both_listed_min_effective() {
        let mem = MemoryStore::from_entries([
            MemoryEntry::speed_cap("a", 45.0, Role::User, 0, true),
            MemoryEntry::speed_cap("b", 60.0, Role::User, 0, true),
        ]);
        let intent = pa_interpret(&UserRequest::routine("home"), &mem, &context(50.0)).unwrap();
        assert_eq!(intent.active_caps_kph, vec![45.0, 60.0]);
        assert_eq!(intent.effective_cap(), Some(45.0));
    }

    #[test]
    fn explicit_speed_wins() {
        let req = UserRequest {
            desired_speed_kph: Some(70.0),
            ..UserRequest::urgent("x")
        };
        let intent = pa_interpret(&req, &MemoryStore::new(), &context(100.0)).unwrap();
        assert_eq!(intent.desired_speed_kph, 70.0);
    }

    #[test]
    fn malformed_requests_are_rejected() {
        let bad_speed = UserRequest {
            desired_speed_kph: Some(-5.0),
            ..UserRequest::routine("x")
        };
        assert!(matches!(
            pa_interpret(&bad_speed, &MemoryStore::new(), &context(50.0)),
            Err(PipelineError::InvalidRequest(_))
        ));
        let no_dest = UserRequest::routine("  ");
        assert!(pa_interpret(&no_dest, &MemoryStore::new(), &context(50.0)).is_err());
    }

    #[test]
    fn tiny_limit_keeps_desired_positive() {
        let intent = pa_interpret(&UserRequest::routine("x"), &MemoryStore::new(), &context(0.1)).unwrap();
        assert_eq!(intent.desired_speed_kph, 0.1);
    }
}
