//! Driving Strategy Agent: intent + context -> policy-level proposal.

use serde::{Deserialize, Serialize};

use super::personal::IntentDescriptor;
use super::safety::{ClaimedContext, Rulebook, SafetyRule};
use super::{input_id, AgentConfig, SpeedOverride};
use crate::domain::{ContextSummary, VehicleFeedback};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LaneChange {
    None,
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Justification {
    pub input: String,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyProposal {
    pub target_speed_kph: f64,
    pub headway_s: f64,
    pub lane_change_intent: LaneChange,
    pub route_pref: String,
    pub justification: Vec<Justification>,
}

/// Preference weights that replace the min-chain when an attacker skews the
/// agent's priorities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreferenceWeights {
    pub efficiency: f64,
    pub user: f64,
    pub caution: f64,
}

impl PreferenceWeights {
    pub fn is_valid(&self) -> bool {
        let ws = [self.efficiency, self.user, self.caution];
        ws.iter().all(|w| w.is_finite() && *w >= 0.0) && ws.iter().sum::<f64>() > 0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub enum SpeedSelection {
    /// target = min(desired, effective cap, posted limit)
    #[default]
    MinChain,
    Weighted(PreferenceWeights),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DrivingStrategyAgent {
    pub config: AgentConfig,
    pub min_headway_s: Option<f64>,
    pub selection: SpeedSelection,
    pub rogue: Option<SpeedOverride>,
}

impl DrivingStrategyAgent {
    pub fn with_rules(rules: &Rulebook) -> Self {
        Self {
            min_headway_s: Some(rules.min_headway_s),
            ..Self::default()
        }
    }

    fn min_headway(&self) -> f64 {
        self.min_headway_s.unwrap_or(Rulebook::default().min_headway_s)
    }

    pub fn propose(
        &self,
        step: u32,
        intent: &IntentDescriptor,
        context: &ContextSummary,
        feedback: &VehicleFeedback,
    ) -> StrategyProposal {
        let cfg = &self.config;
        let mut why = Vec::new();
        let mut cite = |path: &str, rule: &str| {
            why.push(Justification {
                input: input_id(step, path),
                rule: rule.to_string(),
            })
        };

        let limit = context.speed_limit_kph;
        let mut target = match self.selection {
            SpeedSelection::MinChain => {
                let cap = intent.effective_cap();
                let candidates = [
                    (Some(intent.desired_speed_kph), "intent/desired", "DSA-MIN-DESIRED"),
                    (cap, "intent/caps", "DSA-MIN-CAP"),
                    (Some(limit), "context/speed_limit", "DSA-MIN-LIMIT"),
                ];
                let min = candidates
                    .iter()
                    .filter_map(|(v, _, _)| *v)
                    .fold(f64::INFINITY, f64::min);
                for (v, path, rule) in candidates {
                    if v == Some(min) {
                        cite(path, rule);
                    }
                }
                min
            }
            SpeedSelection::Weighted(w) => {
                let cautious = cfg.hazard_factor * limit;
                let blended = (w.efficiency * limit + w.user * intent.desired_speed_kph + w.caution * cautious)
                    / (w.efficiency + w.user + w.caution);
                cite("intent/desired", "DSA-WEIGHTED");
                cite("context/speed_limit", "DSA-WEIGHTED");
                blended.min(limit)
            }
        };

        let mut lane = LaneChange::None;
        let blocking: Vec<usize> = context
            .hazards
            .iter()
            .enumerate()
            .filter(|(_, h)| h.confidence >= cfg.hazard_min_confidence && h.distance_m <= cfg.hazard_radius_m)
            .map(|(i, _)| i)
            .collect();
        if !blocking.is_empty() {
            target *= cfg.hazard_factor;
            for i in &blocking {
                cite(&format!("context/hazards/{i}"), "DSA-HAZARD");
            }
            if context.traffic_density < 0.5 {
                lane = LaneChange::Left;
            }
        }

        if feedback.braking >= cfg.hard_braking_threshold {
            target *= cfg.degraded_profile_factor;
            cite("feedback", "DSA-DEGRADED-PROFILE");
        }

        if let Some(rogue) = self.rogue {
            target = rogue.apply(target);
            cite("intent/desired", "DSA-OVERRIDE");
        }

        let headway = self.min_headway().max(cfg.headway_base_s + context.traffic_density);
        cite("context/traffic_density", "DSA-HEADWAY");

        let route_pref = if context.closures.is_empty() {
            format!("direct:{}", intent.destination_tag)
        } else {
            cite("context/closures", "DSA-ROUTE");
            format!("detour:{}:avoid={}", intent.destination_tag, context.closures.join("+"))
        };

        StrategyProposal {
            target_speed_kph: target,
            headway_s: headway,
            lane_change_intent: lane,
            route_pref,
            justification: why,
        }
    }

    /// Re-proposal after a Revise: the violated bound is tightened, nothing else moves.
    pub fn revise(
        &self,
        step: u32,
        proposal: &StrategyProposal,
        violated: SafetyRule,
        rules: &Rulebook,
        claimed: &ClaimedContext,
        feedback: &VehicleFeedback,
    ) -> StrategyProposal {
        let mut next = proposal.clone();
        match violated {
            SafetyRule::AbsMaxSpeed => next.target_speed_kph = rules.abs_max_speed_kph,
            SafetyRule::ClaimedLimit => next.target_speed_kph = claimed.speed_limit_kph,
            SafetyRule::Acceleration => next.target_speed_kph = rules.max_reachable_speed(feedback.speed_kph),
            SafetyRule::Headway => next.headway_s = rules.min_headway_s,
            SafetyRule::MinSpeed => next.target_speed_kph = rules.effective_floor(claimed, feedback),
        }
        next.justification.push(Justification {
            input: input_id(step, "verdict"),
            rule: format!("DSA-REVISE-{}", violated.id()),
        });
        next
    }
}

/// Default-configured strategy agent.
pub fn dsa_propose(
    intent: &IntentDescriptor,
    context: &ContextSummary,
    feedback: &VehicleFeedback,
) -> StrategyProposal {
    DrivingStrategyAgent::default().propose(0, intent, context, feedback)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Hazard;
    use crate::pipeline::tests::{context, feedback, intent};

    #[test]
    fn equal_values_give_that_value() {
        let p = dsa_propose(&intent(90.0, &[]), &context(90.0), &feedback(85.0));
        assert_eq!(p.target_speed_kph, 90.0);
        // both desired and limit bound the minimum
        let rules: Vec<_> = p.justification.iter().map(|j| j.rule.as_str()).collect();
        assert!(rules.contains(&"DSA-MIN-DESIRED"));
        assert!(rules.contains(&"DSA-MIN-LIMIT"));
    }

    #[test]
    fn cap_binds() {
        let p = dsa_propose(&intent(80.0, &[45.0]), &context(80.0), &feedback(75.0));
        assert_eq!(p.target_speed_kph, 45.0);
        assert!(p
            .justification
            .iter()
            .any(|j| j.rule == "DSA-MIN-CAP" && j.input == "s0/intent/caps"));
    }

    #[test]
    fn spoofed_limit_binds() {
        let p = dsa_propose(&intent(90.0, &[]), &context(40.0), &feedback(85.0));
        assert_eq!(p.target_speed_kph, 40.0);
    }

    #[test]
    fn near_confident_hazard_halves_target() {
        let mut ctx = context(90.0);
        ctx.hazards.push(Hazard {
            kind: "pedestrian".into(),
            distance_m: 60.0,
            confidence: 0.9,
        });
        ctx.hazards.push(Hazard {
            kind: "bag".into(),
            distance_m: 60.0,
            confidence: 0.2,
        });
        ctx.hazards.push(Hazard {
            kind: "cone".into(),
            distance_m: 300.0,
            confidence: 0.9,
        });
        let p = dsa_propose(&intent(90.0, &[]), &ctx, &feedback(85.0));
        assert_eq!(p.target_speed_kph, 45.0);
        assert_eq!(p.lane_change_intent, LaneChange::Left);
        let hz: Vec<_> = p.justification.iter().filter(|j| j.rule == "DSA-HAZARD").collect();
        assert_eq!(hz.len(), 1);
        assert_eq!(hz[0].input, "s0/context/hazards/0");
    }

    #[test]
    fn headway_grows_with_density() {
        let mut ctx = context(90.0);
        ctx.traffic_density = 0.7;
        let p = dsa_propose(&intent(90.0, &[]), &ctx, &feedback(85.0));
        assert!((p.headway_s - 1.7).abs() < 1e-12);
    }

    #[test]
    fn closures_trigger_detour() {
        let mut ctx = context(90.0);
        ctx.closures = vec!["R7".into()];
        let p = dsa_propose(&intent(90.0, &[]), &ctx, &feedback(85.0));
        assert_eq!(p.route_pref, "detour:work:avoid=R7");
    }

    #[test]
    fn weighted_selection_stays_under_limit() {
        let agent = DrivingStrategyAgent {
            selection: SpeedSelection::Weighted(PreferenceWeights {
                efficiency: 0.0,
                user: 1.0,
                caution: 3.0,
            }),
            ..Default::default()
        };
        let p = agent.propose(0, &intent(90.0, &[]), &context(90.0), &feedback(85.0));
        // (90 + 3 * 45) / 4
        assert!((p.target_speed_kph - 56.25).abs() < 1e-12);
    }

    #[test]
    fn hard_braking_feedback_degrades_profile() {
        let mut fb = feedback(85.0);
        fb.braking = 1.0;
        let p = dsa_propose(&intent(90.0, &[]), &context(90.0), &fb);
        assert!((p.target_speed_kph - 72.0).abs() < 1e-12);
    }
}
