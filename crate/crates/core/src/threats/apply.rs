//! Injector application against the mutable per-step pipeline state.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{MessageContent, Payload, Surface, ThreatError, ThreatInjection};
use crate::cav::{EditField, FieldEdit, LayerPerturbation, LayerTag, Window};
use crate::domain::{make_envelope, Authority, ContextSummary, DelegationTable, Hop, MessageEnvelope, Role, ThreatId};
use crate::pipeline::{MemoryEntry, MemoryStore, Pipeline, SpeedSelection, UserRequest};
use crate::trace::EpisodeTrace;

/// Confirmation queries a user answers per step before falling back to defaults.
pub const USER_QUERY_BUDGET: u32 = 3;

/// Scripted user: one seeded draw per step, plus a count of queries
/// received this step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulatedUser {
    pub draw: f64,
    pub queries: u32,
}

impl SimulatedUser {
    pub fn fatigued(&self) -> bool {
        self.queries > USER_QUERY_BUDGET
    }
}

pub type InboxMessage = MessageEnvelope<MessageContent>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub episode: u32,
    pub step: u32,
    pub kind: String,
    pub claimed_sender: Role,
    pub authority: Authority,
    pub admitted: bool,
    pub provenance: Vec<Hop>,
}

/// Everything an injector may touch during one step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineState {
    pub episode: u32,
    pub step: u32,
    pub request: UserRequest,
    pub user: SimulatedUser,
    pub tool_output: ContextSummary,
    pub perturbations: Vec<LayerPerturbation>,
    pub layer_overload: Vec<(LayerTag, f64)>,
    pub delegation: DelegationTable,
    pub inbox: Vec<InboxMessage>,
    /// Context as delivered to the strategy agent.
    pub context: ContextSummary,
    /// Context as seen by the personal agent.
    pub pa_context: ContextSummary,
    pub memory: MemoryStore,
    pub pipeline: Pipeline,
    pub log: Vec<LogEntry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ApplyStatus {
    Applied,
    /// Outside the injection's episode/window; the state is untouched.
    OutOfWindow,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionEffectRecord {
    /// Chain stage id, when the injection belongs to a chain.
    pub stage: Option<String>,
    pub threat: ThreatId,
    pub surface: Surface,
    pub episode: u32,
    pub step: u32,
    pub status: ApplyStatus,
    pub before: String,
    pub after: String,
}

impl InjectionEffectRecord {
    pub fn changed(&self) -> bool {
        self.status == ApplyStatus::Applied && self.before != self.after
    }
}

fn digest<T: Serialize + ?Sized>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("state is always serializable");
    hex::encode(Sha256::digest(bytes))
}

/// Digest of the object(s) an injection may touch.
fn touched_digest(state: &PipelineState, inj: &ThreatInjection) -> String {
    use ThreatId::*;
    match inj.threat {
        T1 => digest(&state.memory),
        T2 => digest(&state.tool_output),
        T11 => digest(&(&state.tool_output, &state.pipeline)),
        T3 => digest(&(&state.delegation, &state.inbox)),
        T9 | T12 => digest(&state.inbox),
        T4 => match inj.surface {
            Surface::Layer(_) => digest(&state.layer_overload),
            _ => digest(&(&state.pa_context, &state.context)),
        },
        T5 => digest(&(&state.pa_context, &state.memory)),
        T6 | T14 | T15 => digest(&state.request),
        T10 => digest(&state.user),
        T7 | T13 => digest(&state.pipeline),
        T8 => digest(&state.log),
        XPerception | XV2x | XCompute | XControlFeedback => digest(&state.perturbations),
    }
}

/// Applies one injection to `state` at `state.step`. Inactive injections
/// yield an `OutOfWindow` record and leave the state untouched.
pub fn apply(inj: &ThreatInjection, state: &mut PipelineState) -> InjectionEffectRecord {
    let before = touched_digest(state, inj);
    let mut record = InjectionEffectRecord {
        stage: None,
        threat: inj.threat,
        surface: inj.surface,
        episode: state.episode,
        step: state.step,
        status: ApplyStatus::OutOfWindow,
        before: before.clone(),
        after: before,
    };
    if !inj.is_active(state.episode, state.step) {
        return record;
    }
    mutate(inj, state);
    record.status = ApplyStatus::Applied;
    record.after = touched_digest(state, inj);
    record
}

fn mutate(inj: &ThreatInjection, state: &mut PipelineState) {
    let step = state.step;
    match &inj.payload {
        Payload::MemoryInsert { key, cap_kph } => {
            state.memory.append(MemoryEntry::speed_cap(
                key.clone(),
                *cap_kph,
                Role::External,
                step,
                inj.persistent,
            ));
        }
        Payload::ToolOutput { edits } => edit_summary(&mut state.tool_output, edits),
        Payload::RemoteCode {
            edits,
            config_field,
            config_value,
        } => {
            edit_summary(&mut state.tool_output, edits);
            for cfg in [&mut state.pipeline.pa.config, &mut state.pipeline.dsa.config] {
                if let Some(slot) = cfg.field_mut(config_field) {
                    *slot = *config_value;
                }
            }
        }
        Payload::PrivilegeGrant { role, message } => {
            let authority = message.authority();
            state.delegation.grant(*role, authority);
            state.inbox.push(make_envelope(*role, authority, message.clone(), step));
        }
        Payload::Spoof {
            claimed_sender,
            message,
        } => {
            let mut env = make_envelope(Role::External, message.authority(), message.clone(), step);
            env.claimed_sender = *claimed_sender;
            state.inbox.push(env);
        }
        Payload::MessageEdit { target, edits } => {
            for env in state.inbox.iter_mut().filter(|e| e.claimed_sender == *target) {
                match &mut env.payload {
                    MessageContent::Summary(s) => edit_summary(s, edits),
                    MessageContent::ContextEdits(list) => list.extend(edits.iter().cloned()),
                    MessageContent::Intent(_) => {}
                }
            }
        }
        Payload::Overload { factor } => match inj.surface {
            Surface::Layer(layer) => state.layer_overload.push((layer, *factor)),
            _ => {
                state.pa_context.degrade(*factor);
                state.context.degrade(*factor);
            }
        },
        Payload::Hallucination { edits } => {
            let before = state.pa_context.speed_limit_kph;
            edit_summary(&mut state.pa_context, edits);
            let limit = state.pa_context.speed_limit_kph;
            let touches_limit = edits.iter().any(|e| e.field == EditField::SpeedLimitKph);
            if inj.persistent && touches_limit && limit != before {
                // the agent records the invented limit as a standing constraint
                state.memory.append(MemoryEntry::speed_cap(
                    "belief:speed_limit",
                    limit,
                    Role::PersonalAgent,
                    step,
                    true,
                ));
            }
        }
        Payload::IntentRewrite { patch } => patch.apply(&mut state.request),
        Payload::Framing { weight, patch } => {
            if state.user.draw < *weight {
                patch.apply(&mut state.request);
            }
        }
        Payload::ConflictingRequests { requests } => {
            state.request = requests[step as usize % requests.len()].clone();
        }
        Payload::Confirmations { count } => state.user.queries += count,
        Payload::Weights { weights } => state.pipeline.dsa.selection = SpeedSelection::Weighted(*weights),
        Payload::RoguePolicy { agent, policy } => match agent {
            Role::PersonalAgent => state.pipeline.pa.rogue = Some(*policy),
            _ => state.pipeline.dsa.rogue = Some(*policy),
        },
        Payload::LogTamper { role } => {
            for entry in state
                .log
                .iter_mut()
                .filter(|e| e.step == step && e.episode == state.episode)
            {
                entry.provenance.retain(|h| role.is_some_and(|r| h.role != r));
            }
        }
        Payload::Layer { edits } => {
            let Surface::Layer(layer) = inj.surface else {
                unreachable!("layer payloads are only legal on layer surfaces")
            };
            state.perturbations.extend(
                edits
                    .iter()
                    .map(|e| LayerPerturbation::new(layer, e.clone(), Window::new(step, step))),
            );
        }
    }
}

fn edit_summary(summary: &mut ContextSummary, edits: &[FieldEdit]) {
    for e in edits {
        e.apply_to_summary(summary);
    }
}

/// True iff the attacked run's SC verdict sequence equals the baseline's.
pub fn stealth_check(baseline: &EpisodeTrace, attacked: &EpisodeTrace) -> Result<bool, ThreatError> {
    baseline.check_paired(attacked)?;
    Ok(baseline.verdict_sequence() == attacked.verdict_sequence())
}

/// Log entries whose provenance no longer names anyone: accountability gaps.
pub fn attribution_gaps(log: &[LogEntry]) -> usize {
    log.iter().filter(|e| e.provenance.is_empty()).count()
}
