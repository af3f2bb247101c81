//! Threat catalog: one injector per threat id, a legality map from threats
//! to the surfaces they may touch, and typed payloads.

mod apply;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cav::{FieldEdit, LayerTag, Window};
use crate::domain::{Authority, ContextSummary, Role, ThreatId};
use crate::pipeline::{AgentConfig, IntentPatch, PreferenceWeights, SpeedOverride, Urgency, UserRequest};

pub use apply::{
    apply, attribution_gaps, stealth_check, ApplyStatus, InboxMessage, InjectionEffectRecord, LogEntry, PipelineState,
    SimulatedUser, USER_QUERY_BUDGET,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThreatError {
    #[error("{threat} may not target surface {surface} (legal: {legal})")]
    IllegalSurface {
        threat: ThreatId,
        surface: Surface,
        legal: String,
    },
    #[error("{threat} expects a `{expected}` payload, got `{got}`")]
    PayloadMismatch {
        threat: ThreatId,
        expected: &'static str,
        got: &'static str,
    },
    #[error("{threat} payload: {reason}")]
    InvalidPayload { threat: ThreatId, reason: String },
    #[error("unknown surface `{0}`")]
    UnknownSurface(String),
    #[error("traces are not paired: {0}")]
    Unpaired(String),
}

// ---------------------------------------------------------------------------
// Surfaces
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Surface {
    PaMemory,
    PaInput,
    ToolOutput,
    InterAgentMsg,
    IdentityField,
    DsaWeights,
    AgentPolicy,
    UserChannel,
    Logs,
    Layer(LayerTag),
}

impl fmt::Display for Surface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Surface::PaMemory => f.write_str("PAMemory"),
            Surface::PaInput => f.write_str("PAInput"),
            Surface::ToolOutput => f.write_str("ToolOutput"),
            Surface::InterAgentMsg => f.write_str("InterAgentMsg"),
            Surface::IdentityField => f.write_str("IdentityField"),
            Surface::DsaWeights => f.write_str("DSAWeights"),
            Surface::AgentPolicy => f.write_str("AgentPolicy"),
            Surface::UserChannel => f.write_str("UserChannel"),
            Surface::Logs => f.write_str("Logs"),
            Surface::Layer(l) => write!(f, "Layer({l:?})"),
        }
    }
}

impl FromStr for Surface {
    type Err = ThreatError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let plain = [
            Surface::PaMemory,
            Surface::PaInput,
            Surface::ToolOutput,
            Surface::InterAgentMsg,
            Surface::IdentityField,
            Surface::DsaWeights,
            Surface::AgentPolicy,
            Surface::UserChannel,
            Surface::Logs,
        ];
        if let Some(found) = plain.into_iter().find(|p| p.to_string() == s) {
            return Ok(found);
        }
        LayerTag::ALL
            .into_iter()
            .map(Surface::Layer)
            .find(|p| p.to_string() == s)
            .ok_or_else(|| ThreatError::UnknownSurface(s.to_string()))
    }
}

impl TryFrom<String> for Surface {
    type Error = ThreatError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Surface> for String {
    fn from(value: Surface) -> Self {
        value.to_string()
    }
}

pub fn legal_surfaces(threat: ThreatId) -> Vec<Surface> {
    use ThreatId::*;
    match threat {
        T1 => vec![Surface::PaMemory],
        T2 | T11 => vec![Surface::ToolOutput],
        T3 | T12 => vec![Surface::InterAgentMsg],
        T4 => vec![
            Surface::PaInput,
            Surface::Layer(LayerTag::Perception),
            Surface::Layer(LayerTag::V2X),
            Surface::Layer(LayerTag::Compute),
        ],
        T5 | T6 => vec![Surface::PaInput],
        T7 => vec![Surface::DsaWeights],
        T8 => vec![Surface::Logs],
        T9 => vec![Surface::IdentityField],
        T10 | T14 | T15 => vec![Surface::UserChannel],
        T13 => vec![Surface::AgentPolicy],
        XPerception => vec![Surface::Layer(LayerTag::Perception)],
        XV2x => vec![Surface::Layer(LayerTag::V2X)],
        XCompute => vec![Surface::Layer(LayerTag::Compute)],
        XControlFeedback => vec![Surface::Layer(LayerTag::ControlFeedback)],
    }
}

// ---------------------------------------------------------------------------
// Payloads
// ---------------------------------------------------------------------------

/// Content of an injected inter-agent message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MessageContent {
    Summary(ContextSummary),
    ContextEdits(Vec<FieldEdit>),
    Intent(IntentPatch),
}

impl MessageContent {
    pub fn authority(&self) -> Authority {
        match self {
            MessageContent::Summary(_) | MessageContent::ContextEdits(_) => Authority::ContextOnly,
            MessageContent::Intent(_) => Authority::IntentOnly,
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            MessageContent::Summary(s) => s.validate().map_err(|e| e.to_string()),
            MessageContent::ContextEdits(edits) => validate_edits(edits, false),
            MessageContent::Intent(p) => {
                for v in [p.desired_speed_kph, p.add_cap_kph].into_iter().flatten() {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(format!("intent speeds must be positive, got {v}"));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Partial rewrite of a user request.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RequestPatch {
    #[serde(default)]
    pub desired_speed_kph: Option<f64>,
    #[serde(default)]
    pub urgency_tag: Option<Urgency>,
    #[serde(default)]
    pub destination: Option<String>,
}

impl RequestPatch {
    pub fn apply(&self, req: &mut UserRequest) {
        if let Some(v) = self.desired_speed_kph {
            req.desired_speed_kph = Some(v);
        }
        if let Some(u) = self.urgency_tag {
            req.urgency_tag = u;
        }
        if let Some(d) = &self.destination {
            req.destination = d.clone();
        }
    }

    fn validate(&self) -> Result<(), String> {
        let mut probe = UserRequest::routine("probe");
        self.apply(&mut probe);
        probe.validate().map_err(|e| e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payload {
    /// T1: a speed-cap constraint slipped into long-term memory.
    MemoryInsert { key: String, cap_kph: f64 },
    /// T2: tampered map/traffic tool answer.
    ToolOutput { edits: Vec<FieldEdit> },
    /// T3: a role gains an authority it should not have and uses it.
    PrivilegeGrant {
        #[serde(default = "external")]
        role: Role,
        message: MessageContent,
    },
    /// T4: completeness multiplied by `factor` in (0,1).
    Overload { factor: f64 },
    /// T5: invented context detail adopted by the personal agent.
    Hallucination { edits: Vec<FieldEdit> },
    /// T6: the request as understood diverges from the request as given.
    IntentRewrite { patch: RequestPatch },
    /// T7: skewed optimization priorities.
    Weights { weights: PreferenceWeights },
    /// T8: provenance hops deleted from the log (all roles when `role` is unset).
    LogTamper {
        #[serde(default)]
        role: Option<Role>,
    },
    /// T9: message from an external sender claiming another identity.
    Spoof {
        claimed_sender: Role,
        message: MessageContent,
    },
    /// T10: extra confirmation queries per step.
    Confirmations { count: u32 },
    /// T11: tampered tool answer plus one agent config field overwritten.
    RemoteCode {
        #[serde(default)]
        edits: Vec<FieldEdit>,
        config_field: String,
        config_value: f64,
    },
    /// T12: edits appended to in-flight context envelopes from `target`.
    MessageEdit { target: Role, edits: Vec<FieldEdit> },
    /// T13: an agent's speed policy replaced.
    RoguePolicy { agent: Role, policy: SpeedOverride },
    /// T14: a scripted sequence of conflicting requests, cycled.
    ConflictingRequests { requests: Vec<UserRequest> },
    /// T15: user adopts the agent's framing with probability `weight`.
    Framing { weight: f64, patch: RequestPatch },
    /// Cross-layer vectors and layer-targeted overload use the surface's layer.
    Layer { edits: Vec<FieldEdit> },
}

fn external() -> Role {
    Role::External
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::MemoryInsert { .. } => "memory_insert",
            Payload::ToolOutput { .. } => "tool_output",
            Payload::PrivilegeGrant { .. } => "privilege_grant",
            Payload::Overload { .. } => "overload",
            Payload::Hallucination { .. } => "hallucination",
            Payload::IntentRewrite { .. } => "intent_rewrite",
            Payload::Weights { .. } => "weights",
            Payload::LogTamper { .. } => "log_tamper",
            Payload::Spoof { .. } => "spoof",
            Payload::Confirmations { .. } => "confirmations",
            Payload::RemoteCode { .. } => "remote_code",
            Payload::MessageEdit { .. } => "message_edit",
            Payload::RoguePolicy { .. } => "rogue_policy",
            Payload::ConflictingRequests { .. } => "conflicting_requests",
            Payload::Framing { .. } => "framing",
            Payload::Layer { .. } => "layer",
        }
    }
}

fn validate_edits(edits: &[FieldEdit], on_feedback: bool) -> Result<(), String> {
    if edits.is_empty() {
        return Err("at least one edit is required".into());
    }
    edits
        .iter()
        .try_for_each(|e| e.validate(on_feedback))
        .map_err(|e| e.to_string())
}

// ---------------------------------------------------------------------------
// Registry
// ---------------------------------------------------------------------------

/// Where in a step an injection takes effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Request,
    Tools,
    Layers,
    Messages,
    Context,
    Memory,
    Agents,
    Logs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Injector {
    pub threat: ThreatId,
    pub payload_kind: &'static str,
    pub phase: Phase,
    pub effect: &'static str,
}

pub const REGISTRY: [Injector; 19] = [
    Injector {
        threat: ThreatId::T1,
        payload_kind: "memory_insert",
        phase: Phase::Memory,
        effect: "appends a speed-cap constraint to personal-agent memory",
    },
    Injector {
        threat: ThreatId::T2,
        payload_kind: "tool_output",
        phase: Phase::Tools,
        effect: "edits the map/traffic tool answer",
    },
    Injector {
        threat: ThreatId::T3,
        payload_kind: "privilege_grant",
        phase: Phase::Messages,
        effect: "widens a role's authority and sends a message with it",
    },
    Injector {
        threat: ThreatId::T4,
        payload_kind: "overload",
        phase: Phase::Context,
        effect: "scales context completeness and drops records",
    },
    Injector {
        threat: ThreatId::T5,
        payload_kind: "hallucination",
        phase: Phase::Context,
        effect: "edits the personal agent's view of context",
    },
    Injector {
        threat: ThreatId::T6,
        payload_kind: "intent_rewrite",
        phase: Phase::Request,
        effect: "rewrites request urgency/destination/speed",
    },
    Injector {
        threat: ThreatId::T7,
        payload_kind: "weights",
        phase: Phase::Agents,
        effect: "replaces the min-chain with weighted preferences",
    },
    Injector {
        threat: ThreatId::T8,
        payload_kind: "log_tamper",
        phase: Phase::Logs,
        effect: "deletes provenance hops from the log",
    },
    Injector {
        threat: ThreatId::T9,
        payload_kind: "spoof",
        phase: Phase::Messages,
        effect: "sends a message whose claimed sender differs from its sender",
    },
    Injector {
        threat: ThreatId::T10,
        payload_kind: "confirmations",
        phase: Phase::Request,
        effect: "floods the user with confirmation queries",
    },
    Injector {
        threat: ThreatId::T11,
        payload_kind: "remote_code",
        phase: Phase::Tools,
        effect: "edits tool output and overwrites one agent config field",
    },
    Injector {
        threat: ThreatId::T12,
        payload_kind: "message_edit",
        phase: Phase::Messages,
        effect: "edits in-flight context envelopes",
    },
    Injector {
        threat: ThreatId::T13,
        payload_kind: "rogue_policy",
        phase: Phase::Agents,
        effect: "swaps an agent's speed policy",
    },
    Injector {
        threat: ThreatId::T14,
        payload_kind: "conflicting_requests",
        phase: Phase::Request,
        effect: "replaces requests with a conflicting sequence",
    },
    Injector {
        threat: ThreatId::T15,
        payload_kind: "framing",
        phase: Phase::Request,
        effect: "biases the user's reply toward the agent's framing",
    },
    Injector {
        threat: ThreatId::XPerception,
        payload_kind: "layer",
        phase: Phase::Layers,
        effect: "edits the perception summary",
    },
    Injector {
        threat: ThreatId::XV2x,
        payload_kind: "layer",
        phase: Phase::Layers,
        effect: "edits the V2X broadcast",
    },
    Injector {
        threat: ThreatId::XCompute,
        payload_kind: "layer",
        phase: Phase::Layers,
        effect: "biases the onboard abstraction",
    },
    Injector {
        threat: ThreatId::XControlFeedback,
        payload_kind: "layer",
        phase: Phase::Layers,
        effect: "falsifies control feedback",
    },
];

pub fn injector(threat: ThreatId) -> &'static Injector {
    REGISTRY
        .iter()
        .find(|i| i.threat == threat)
        .expect("every threat id has a registered injector")
}

// ---------------------------------------------------------------------------
// Injections
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreatInjection {
    pub threat: ThreatId,
    pub surface: Surface,
    pub payload: Payload,
    #[serde(default = "always")]
    pub window: Window,
    #[serde(default)]
    pub persistent: bool,
    /// Episode in which the injection is live.
    #[serde(default)]
    pub episode: u32,
}

fn always() -> Window {
    Window::ALWAYS
}

impl ThreatInjection {
    pub fn new(threat: ThreatId, surface: Surface, payload: Payload) -> Self {
        Self {
            threat,
            surface,
            payload,
            window: Window::ALWAYS,
            persistent: false,
            episode: 0,
        }
    }

    pub fn with_window(mut self, window: Window) -> Self {
        self.window = window;
        self
    }

    pub fn persistent(mut self, persistent: bool) -> Self {
        self.persistent = persistent;
        self
    }

    pub fn phase(&self) -> Phase {
        match (self.threat, self.surface) {
            (ThreatId::T4, Surface::Layer(_)) => Phase::Layers,
            (t, _) => injector(t).phase,
        }
    }

    pub fn is_active(&self, episode: u32, step: u32) -> bool {
        self.episode == episode && self.window.contains(step)
    }

    /// Legality plus payload shape; run at load time.
    pub fn validate(&self) -> Result<(), ThreatError> {
        let threat = self.threat;
        let legal = legal_surfaces(threat);
        if !legal.contains(&self.surface) {
            return Err(ThreatError::IllegalSurface {
                threat,
                surface: self.surface,
                legal: legal.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", "),
            });
        }
        let expected = match (threat, self.surface) {
            (ThreatId::T4, _) => "overload",
            (t, _) => injector(t).payload_kind,
        };
        if self.payload.kind() != expected {
            return Err(ThreatError::PayloadMismatch {
                threat,
                expected,
                got: self.payload.kind(),
            });
        }
        let invalid = |reason: String| ThreatError::InvalidPayload { threat, reason };
        match &self.payload {
            Payload::MemoryInsert { key, cap_kph } => {
                if key.is_empty() || !(*cap_kph > 0.0 && cap_kph.is_finite()) {
                    return Err(invalid("memory_insert needs a key and a positive cap".into()));
                }
            }
            Payload::ToolOutput { edits } | Payload::Hallucination { edits } | Payload::MessageEdit { edits, .. } => {
                validate_edits(edits, false).map_err(invalid)?
            }
            Payload::Layer { edits } => {
                let on_feedback = self.surface == Surface::Layer(LayerTag::ControlFeedback);
                validate_edits(edits, on_feedback).map_err(invalid)?
            }
            Payload::PrivilegeGrant { role, message } => {
                if *role == Role::SafetyCheck {
                    return Err(invalid("the safety check never sends content".into()));
                }
                message.validate().map_err(invalid)?
            }
            Payload::Spoof {
                claimed_sender,
                message,
            } => {
                if *claimed_sender == Role::External {
                    return Err(invalid(
                        "claimed sender must differ from the real (External) sender".into(),
                    ));
                }
                message.validate().map_err(invalid)?
            }
            Payload::Overload { factor } => {
                if !(*factor > 0.0 && *factor < 1.0) {
                    return Err(invalid(format!("factor must be in (0,1), got {factor}")));
                }
            }
            Payload::IntentRewrite { patch } => patch.validate().map_err(invalid)?,
            Payload::Framing { weight, patch } => {
                if !(0.0..=1.0).contains(weight) {
                    return Err(invalid(format!("weight must be in [0,1], got {weight}")));
                }
                patch.validate().map_err(invalid)?
            }
            Payload::Weights { weights } => {
                if !weights.is_valid() {
                    return Err(invalid("weights must be non-negative with a positive sum".into()));
                }
            }
            Payload::LogTamper { .. } => {}
            Payload::Confirmations { count } => {
                if *count == 0 {
                    return Err(invalid("count must be at least 1".into()));
                }
            }
            Payload::RemoteCode {
                edits,
                config_field,
                config_value,
            } => {
                if !edits.is_empty() {
                    validate_edits(edits, false).map_err(invalid)?;
                }
                if !AgentConfig::FIELDS.contains(&config_field.as_str()) {
                    return Err(invalid(format!(
                        "unknown config field `{config_field}` (expected one of {})",
                        AgentConfig::FIELDS.join(", ")
                    )));
                }
                if !config_value.is_finite() {
                    return Err(invalid("config value must be finite".into()));
                }
            }
            Payload::RoguePolicy { agent, policy } => {
                if !matches!(agent, Role::PersonalAgent | Role::DrivingStrategyAgent) {
                    return Err(invalid("only the personal or strategy agent can go rogue".into()));
                }
                let ok = match policy {
                    SpeedOverride::Fixed { kph } => *kph > 0.0 && kph.is_finite(),
                    SpeedOverride::Scale { factor } => *factor > 0.0 && factor.is_finite(),
                };
                if !ok {
                    return Err(invalid("override must keep speeds positive".into()));
                }
            }
            Payload::ConflictingRequests { requests } => {
                if requests.is_empty() {
                    return Err(invalid("at least one request is required".into()));
                }
                for r in requests {
                    r.validate().map_err(|e| invalid(e.to_string()))?;
                }
            }
        }
        Ok(())
    }
}
