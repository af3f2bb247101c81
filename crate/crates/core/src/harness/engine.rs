//! Episode loop. Each step runs the injection phases in a fixed order around
//! the CAV layers and the agent pipeline; injections are the only thing that
//! differs between a baseline run and its attacked twin.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{HarnessError, ScenarioConfig};
use crate::cav::{control_feedback, fuse, map_service, perceive, v2x_broadcast, LayerTag};
use crate::chain::resolve_builtin_chain;
use crate::domain::{make_envelope, Authority, ContextSummary, DelegationTable, Role, ThreatId};
use crate::pipeline::{input_id, IntentPatch, MemoryStore, Pipeline, StepInputs, Urgency, UserRequest};
use crate::threats::{
    apply, InjectionEffectRecord, LogEntry, MessageContent, Phase, PipelineState, SimulatedUser, ThreatInjection,
};
use crate::trace::{EpisodeTrace, StepRecord};

/// When a scheduled injection becomes eligible. Eligible injections still
/// have to match their own episode and window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trigger {
    /// From this step of each episode onward.
    AtStep(u32),
    /// From the step after the named stage first changed something.
    AfterStageEffect(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledInjection {
    pub stage: Option<String>,
    pub injection: ThreatInjection,
    pub trigger: Trigger,
}

impl ScheduledInjection {
    pub fn plain(injection: ThreatInjection) -> Self {
        Self {
            stage: None,
            injection,
            trigger: Trigger::AtStep(0),
        }
    }
}

/// Plain injections plus the inject stages of any referenced chains.
pub fn schedule_of(config: &ScenarioConfig) -> Vec<ScheduledInjection> {
    let mut out: Vec<ScheduledInjection> = config
        .injections
        .iter()
        .cloned()
        .map(ScheduledInjection::plain)
        .collect();
    for id in &config.chains {
        let chain = resolve_builtin_chain(id).expect("chain refs are validated at load");
        out.extend(chain.schedule());
    }
    out
}

/// Runs every episode of `config`; `with_injections = false` gives the
/// baseline twin (same seed, same steps, no injections).
pub fn run(config: &ScenarioConfig, with_injections: bool) -> Result<EpisodeTrace, HarnessError> {
    let schedule = if with_injections { schedule_of(config) } else { vec![] };
    let mut trace = run_schedule(config, &schedule)?;
    trace.with_injections = with_injections;
    Ok(trace)
}

fn episode_seed(seed: u64, episode: u32) -> u64 {
    seed ^ (episode as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn digest<T: Serialize + ?Sized>(value: &T) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(value).expect("serializable")))
}

/// Injection order inside a phase: list order, except that message edits
/// run after every other message injection so they see the whole inbox.
fn phase_order(s: &ScheduledInjection) -> (Phase, u8) {
    let inj = &s.injection;
    (inj.phase(), u8::from(inj.threat == ThreatId::T12))
}

type Position = (u32, u32);

struct Scheduler<'a> {
    schedule: Vec<&'a ScheduledInjection>,
    fired: BTreeMap<String, Position>,
}

impl<'a> Scheduler<'a> {
    fn new(schedule: &'a [ScheduledInjection]) -> Self {
        let mut schedule: Vec<_> = schedule.iter().collect();
        schedule.sort_by_key(|s| phase_order(s));
        Self {
            schedule,
            fired: BTreeMap::new(),
        }
    }

    fn triggered(&self, s: &ScheduledInjection, at: Position) -> bool {
        match &s.trigger {
            Trigger::AtStep(n) => at.1 >= *n,
            Trigger::AfterStageEffect(stage) => self.fired.get(stage).is_some_and(|p| *p < at),
        }
    }

    fn run_phase(&mut self, phase: Phase, state: &mut PipelineState, effects: &mut Vec<InjectionEffectRecord>) {
        let at = (state.episode, state.step);
        let due: Vec<&ScheduledInjection> = self
            .schedule
            .iter()
            .copied()
            .filter(|s| s.injection.phase() == phase && self.triggered(s, at))
            .collect();
        for s in due {
            let mut record = apply(&s.injection, state);
            record.stage = s.stage.clone();
            if let (true, Some(stage)) = (record.changed(), &s.stage) {
                self.fired.entry(stage.clone()).or_insert(at);
            }
            effects.push(record);
        }
    }
}

fn log_entry(state: &PipelineState, kind: &str, role: Role, authority: Authority) -> LogEntry {
    let env = make_envelope(role, authority, (), state.step);
    LogEntry {
        episode: state.episode,
        step: state.step,
        kind: kind.to_string(),
        claimed_sender: role,
        authority,
        admitted: true,
        provenance: env.provenance().to_vec(),
    }
}

pub fn run_schedule(config: &ScenarioConfig, schedule: &[ScheduledInjection]) -> Result<EpisodeTrace, HarnessError> {
    let world = &config.world;
    let base_pipeline = Pipeline::new(config.rules.clone());
    let mut scheduler = Scheduler::new(schedule);
    let mut memory = MemoryStore::from_entries(config.memory.iter().cloned());
    let mut steps = Vec::new();
    let mut effects = Vec::new();
    let mut log = Vec::new();

    for episode in 0..config.episodes {
        let mut rng = ChaCha8Rng::seed_from_u64(episode_seed(config.seed, episode));
        for step in 0..config.steps {
            let draw: f64 = rng.gen();
            let scripted = config.requests[step as usize % config.requests.len()].clone();
            let scripted_digest = digest(&(episode, step, world, &scripted, draw));
            let truth = world.projection(crate::domain::SourceLayer::Fusion);
            let mut st = PipelineState {
                episode,
                step,
                request: scripted,
                user: SimulatedUser { draw, queries: 0 },
                tool_output: map_service(world),
                perturbations: vec![],
                layer_overload: vec![],
                delegation: DelegationTable::default(),
                inbox: vec![],
                context: truth.clone(),
                pa_context: truth,
                memory: std::mem::take(&mut memory),
                pipeline: base_pipeline.clone(),
                log: vec![],
            };

            // user channel, then the personal agent's own confirmation query
            scheduler.run_phase(Phase::Request, &mut st, &mut effects);
            st.user.queries += 1;
            if st.user.fatigued() {
                st.request = UserRequest {
                    desired_speed_kph: None,
                    urgency_tag: Urgency::Routine,
                    destination: st.request.destination.clone(),
                };
            }

            scheduler.run_phase(Phase::Tools, &mut st, &mut effects);

            scheduler.run_phase(Phase::Layers, &mut st, &mut effects);
            let mut perception = perceive(world, &st.perturbations, step);
            let mut v2x = v2x_broadcast(world, &st.perturbations, step);
            for (layer, factor) in &st.layer_overload {
                match layer {
                    LayerTag::V2X => v2x.degrade(*factor),
                    _ => perception.degrade(*factor),
                }
            }
            let feedback = control_feedback(world, &st.perturbations, step);
            let fused = fuse(&[perception, v2x, st.tool_output.clone()]).expect("three summaries");

            st.inbox.push(make_envelope(
                Role::CavStack,
                Authority::ContextOnly,
                MessageContent::Summary(fused.clone()),
                step,
            ));
            scheduler.run_phase(Phase::Messages, &mut st, &mut effects);
            let mut summaries: Vec<ContextSummary> = Vec::new();
            let mut edits = Vec::new();
            let mut patches: Vec<(String, IntentPatch)> = Vec::new();
            let mut rejected = 0;
            for (i, env) in st.inbox.iter().enumerate() {
                let admitted = st.delegation.admit(env).is_ok();
                st.log.push(LogEntry {
                    episode,
                    step,
                    kind: format!("inbox/{i}"),
                    claimed_sender: env.claimed_sender,
                    authority: env.authority,
                    admitted,
                    provenance: env.provenance().to_vec(),
                });
                if !admitted {
                    rejected += 1;
                    continue;
                }
                match &env.payload {
                    MessageContent::Summary(s) => summaries.push(s.clone()),
                    MessageContent::ContextEdits(list) => edits.extend(list.iter().cloned()),
                    MessageContent::Intent(p) => patches.push((input_id(step, &format!("inbox/{i}")), p.clone())),
                }
            }
            let mut context = fuse(&summaries).unwrap_or(fused);
            for e in &edits {
                e.apply_to_summary(&mut context);
            }
            st.context = context.clone();
            st.pa_context = context;

            scheduler.run_phase(Phase::Context, &mut st, &mut effects);
            scheduler.run_phase(Phase::Memory, &mut st, &mut effects);
            scheduler.run_phase(Phase::Agents, &mut st, &mut effects);

            let outcome = st
                .pipeline
                .step(StepInputs {
                    step,
                    request: &st.request,
                    memory: &st.memory,
                    pa_context: &st.pa_context,
                    dsa_context: &st.context,
                    feedback: &feedback,
                    intent_patches: &patches,
                })
                .map_err(|source| HarnessError::Pipeline { episode, step, source })?;

            let mut entries = vec![log_entry(&st, "request", Role::User, Authority::IntentOnly)];
            entries.append(&mut st.log);
            entries.push(log_entry(&st, "intent", Role::PersonalAgent, Authority::IntentOnly));
            entries.push(log_entry(
                &st,
                "proposal",
                Role::DrivingStrategyAgent,
                Authority::ProposalOnly,
            ));
            for (i, _) in outcome.verdicts.iter().enumerate() {
                entries.push(log_entry(
                    &st,
                    &format!("verdict/{i}"),
                    Role::SafetyCheck,
                    Authority::VerdictOnly,
                ));
            }
            st.log = entries;
            scheduler.run_phase(Phase::Logs, &mut st, &mut effects);
            log.append(&mut st.log);

            let mut inputs: Vec<String> = [
                "intent/desired",
                "intent/caps",
                "context/speed_limit",
                "context/traffic_density",
                "context/closures",
                "feedback",
                "verdict",
            ]
            .iter()
            .map(|p| input_id(step, p))
            .collect();
            inputs.extend((0..st.context.hazards.len()).map(|i| input_id(step, &format!("context/hazards/{i}"))));
            inputs.extend((0..st.inbox.len()).map(|i| input_id(step, &format!("inbox/{i}"))));

            memory = std::mem::take(&mut st.memory);
            steps.push(StepRecord {
                episode,
                step,
                scripted_digest,
                request: st.request,
                context: st.context,
                feedback,
                inputs,
                rejected_messages: rejected,
                intent: outcome.intent,
                proposal: outcome.proposal,
                verdicts: outcome.verdicts,
                revised: outcome.revised,
                approved: outcome.approved,
            });
        }
        memory = memory.carry_over();
    }

    Ok(EpisodeTrace {
        scenario_id: config.id.clone(),
        seed: config.seed,
        with_injections: !schedule.is_empty(),
        episodes: config.episodes,
        steps_per_episode: config.steps,
        steps,
        effects,
        log,
        final_memory: memory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cav::{EditField, FieldEdit, WorldTruth};
    use crate::domain::{AgencyLevel, DrivingMode, RoadClass};
    use crate::pipeline::{Decision, Rulebook};
    use crate::threats::{Payload, Surface};

    fn config(limit: f64, urgency: Urgency) -> ScenarioConfig {
        ScenarioConfig {
            id: "unit".into(),
            description: String::new(),
            mode: DrivingMode::Autonomous,
            agency: AgencyLevel::new(4).unwrap(),
            episodes: 1,
            steps: 3,
            seed: 7,
            world: WorldTruth {
                true_speed_limit_kph: limit,
                true_hazards: vec![],
                true_closures: vec![],
                road_class: RoadClass::Highway,
                vehicle_true_speed_kph: 85.0,
                traffic_density: 0.2,
            },
            rules: Rulebook::default(),
            requests: vec![UserRequest {
                desired_speed_kph: None,
                urgency_tag: urgency,
                destination: "office".into(),
            }],
            memory: vec![],
            injections: vec![],
            chains: vec![],
            expect: None,
        }
    }

    #[test]
    fn baseline_routine_highway() {
        let t = run(&config(90.0, Urgency::Routine), false).unwrap();
        assert_eq!(t.approved_targets(), vec![81.0; 3]);
        assert!(t.effects.is_empty());
    }

    #[test]
    fn zero_steps_gives_empty_trace() {
        let mut c = config(90.0, Urgency::Routine);
        c.steps = 0;
        assert!(run(&c, true).unwrap().steps.is_empty());
    }

    #[test]
    fn spoofed_v2x_limit_binds() {
        let mut c = config(90.0, Urgency::Urgent);
        c.injections.push(ThreatInjection::new(
            ThreatId::XV2x,
            Surface::Layer(LayerTag::V2X),
            Payload::Layer {
                edits: vec![FieldEdit::set(EditField::SpeedLimitKph, 40.0)],
            },
        ));
        let t = run(&c, true).unwrap();
        assert_eq!(t.approved_targets(), vec![40.0; 3]);
        assert!(t.steps.iter().all(|s| s.decisions() == vec![Decision::Approve]));
        assert_eq!(c.world.true_speed_limit_kph, 90.0);
    }

    #[test]
    fn unauthorised_intent_is_dropped_without_grant() {
        let mut c = config(90.0, Urgency::Routine);
        c.injections.push(ThreatInjection::new(
            ThreatId::T9,
            Surface::IdentityField,
            Payload::Spoof {
                claimed_sender: Role::DrivingStrategyAgent,
                message: MessageContent::Intent(IntentPatch {
                    desired_speed_kph: None,
                    add_cap_kph: Some(30.0),
                }),
            },
        ));
        let t = run(&c, true).unwrap();
        assert_eq!(t.approved_targets(), vec![81.0; 3]);
        assert!(t.steps.iter().all(|s| s.rejected_messages == 1));
    }

    #[test]
    fn justifications_cite_known_inputs() {
        let mut c = config(90.0, Urgency::Routine);
        c.world.true_hazards.push(crate::domain::Hazard {
            kind: "debris".into(),
            distance_m: 50.0,
            confidence: 0.9,
        });
        let t = run(&c, false).unwrap();
        for s in &t.steps {
            assert!(!s.approved.justification.is_empty());
            for j in &s.approved.justification {
                assert!(s.inputs.contains(&j.input), "{} not in {:?}", j.input, s.inputs);
            }
        }
    }
}
