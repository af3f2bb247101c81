//! Deterministic safety check. Stateless: every verdict is a function of
//! its arguments, including the explicit revision lineage.
//!
//! The check reads only the *claimed* context. It has no access to
//! provenance or ground truth.

use serde::{Deserialize, Serialize};

use super::strategy::StrategyProposal;
use crate::domain::{RoadClass, VehicleFeedback};

/// Horizon over which a speed change is assumed to be realized.
pub const ACCEL_WINDOW_S: f64 = 10.0;
const KPH_PER_MPS: f64 = 3.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Rulebook {
    pub abs_max_speed_kph: f64,
    pub max_accel_mps2: f64,
    /// Actuator-level bound; not decidable from a policy proposal, so
    /// carried for the control stack but not checked here.
    pub max_jerk_mps3: f64,
    pub min_headway_s: f64,
    pub min_speed_kph_on_highway: f64,
}

impl Default for Rulebook {
    fn default() -> Self {
        Self {
            abs_max_speed_kph: 130.0,
            max_accel_mps2: 3.0,
            max_jerk_mps3: 2.5,
            min_headway_s: 1.0,
            min_speed_kph_on_highway: 0.0,
        }
    }
}

impl Rulebook {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("abs_max_speed_kph", self.abs_max_speed_kph),
            ("max_accel_mps2", self.max_accel_mps2),
            ("max_jerk_mps3", self.max_jerk_mps3),
            ("min_headway_s", self.min_headway_s),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be strictly positive, got {v}"));
            }
        }
        if !(self.min_speed_kph_on_highway >= 0.0 && self.min_speed_kph_on_highway.is_finite()) {
            return Err(format!(
                "min_speed_kph_on_highway must be >= 0, got {}",
                self.min_speed_kph_on_highway
            ));
        }
        Ok(())
    }

    /// Implied acceleration in m/s^2 of moving from `from_kph` to `to_kph`
    /// over the check horizon.
    pub fn implied_accel(from_kph: f64, to_kph: f64) -> f64 {
        (to_kph - from_kph) / KPH_PER_MPS / ACCEL_WINDOW_S
    }

    /// Largest target whose implied acceleration from `speed_kph` is within bounds.
    pub fn max_reachable_speed(&self, speed_kph: f64) -> f64 {
        let mut v = speed_kph + self.max_accel_mps2 * KPH_PER_MPS * ACCEL_WINDOW_S;
        while Self::implied_accel(speed_kph, v) > self.max_accel_mps2 {
            v = v.next_down();
        }
        v
    }

    /// Highway minimum speed, never above any upper bound the proposal
    /// must also satisfy.
    pub fn effective_floor(&self, claimed: &ClaimedContext, feedback: &VehicleFeedback) -> f64 {
        if claimed.road_class != RoadClass::Highway || self.min_speed_kph_on_highway <= 0.0 {
            return 0.0;
        }
        self.min_speed_kph_on_highway.min(self.upper_bound(claimed, feedback))
    }

    fn upper_bound(&self, claimed: &ClaimedContext, feedback: &VehicleFeedback) -> f64 {
        self.abs_max_speed_kph
            .min(claimed.speed_limit_kph)
            .min(self.max_reachable_speed(feedback.speed_kph))
    }
}

/// The slice of context the safety check is allowed to see.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaimedContext {
    pub speed_limit_kph: f64,
    pub road_class: RoadClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SafetyRule {
    AbsMaxSpeed,
    ClaimedLimit,
    Acceleration,
    Headway,
    MinSpeed,
}

impl SafetyRule {
    pub fn id(self) -> &'static str {
        match self {
            SafetyRule::AbsMaxSpeed => "SC-ABS-MAX",
            SafetyRule::ClaimedLimit => "SC-CLAIMED-LIMIT",
            SafetyRule::Acceleration => "SC-ACCEL",
            SafetyRule::Headway => "SC-HEADWAY",
            SafetyRule::MinSpeed => "SC-MIN-SPEED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Approve,
    Revise,
    Substitute,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Approve => "Approve",
            Decision::Revise => "Revise",
            Decision::Substitute => "Substitute",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SafetyVerdict {
    pub decision: Decision,
    pub reason: Option<SafetyRule>,
    pub substitute: Option<StrategyProposal>,
}

impl SafetyVerdict {
    fn approve() -> Self {
        Self {
            decision: Decision::Approve,
            reason: None,
            substitute: None,
        }
    }
}

/// How many times this proposal's lineage has already been sent back in
/// the current step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lineage {
    pub prior_revisions: u32,
}

impl Lineage {
    pub const FIRST: Lineage = Lineage { prior_revisions: 0 };

    pub fn next(self) -> Lineage {
        Lineage {
            prior_revisions: self.prior_revisions + 1,
        }
    }
}

/// First violated rule, in fixed check order.
pub fn first_violation(
    proposal: &StrategyProposal,
    feedback: &VehicleFeedback,
    rules: &Rulebook,
    claimed: &ClaimedContext,
) -> Option<SafetyRule> {
    let target = proposal.target_speed_kph;
    if target > rules.abs_max_speed_kph {
        return Some(SafetyRule::AbsMaxSpeed);
    }
    if target > claimed.speed_limit_kph {
        return Some(SafetyRule::ClaimedLimit);
    }
    // Only speed increases are bounded; slowing down is the conservative direction.
    if Rulebook::implied_accel(feedback.speed_kph, target) > rules.max_accel_mps2 {
        return Some(SafetyRule::Acceleration);
    }
    if proposal.headway_s < rules.min_headway_s {
        return Some(SafetyRule::Headway);
    }
    if target < rules.effective_floor(claimed, feedback) {
        return Some(SafetyRule::MinSpeed);
    }
    None
}

/// The proposal pulled inside every bound.
pub fn clamp_to_rules(
    proposal: &StrategyProposal,
    feedback: &VehicleFeedback,
    rules: &Rulebook,
    claimed: &ClaimedContext,
) -> StrategyProposal {
    let upper = rules.upper_bound(claimed, feedback);
    let floor = rules.effective_floor(claimed, feedback);
    let mut out = proposal.clone();
    out.target_speed_kph = proposal.target_speed_kph.min(upper).max(floor);
    out.headway_s = proposal.headway_s.max(rules.min_headway_s);
    out
}

pub fn sc_validate(
    proposal: &StrategyProposal,
    feedback: &VehicleFeedback,
    rules: &Rulebook,
    claimed: &ClaimedContext,
    lineage: Lineage,
) -> SafetyVerdict {
    match first_violation(proposal, feedback, rules, claimed) {
        None => SafetyVerdict::approve(),
        Some(rule) if lineage.prior_revisions == 0 => SafetyVerdict {
            decision: Decision::Revise,
            reason: Some(rule),
            substitute: None,
        },
        Some(rule) => SafetyVerdict {
            decision: Decision::Substitute,
            reason: Some(rule),
            substitute: Some(clamp_to_rules(proposal, feedback, rules, claimed)),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::tests::{feedback, proposal};

    fn claimed(limit: f64) -> ClaimedContext {
        ClaimedContext {
            speed_limit_kph: limit,
            road_class: RoadClass::Highway,
        }
    }

    #[test]
    fn safe_proposal_is_approved() {
        let v = sc_validate(
            &proposal(45.0),
            &feedback(40.0),
            &Rulebook::default(),
            &claimed(80.0),
            Lineage::FIRST,
        );
        assert_eq!(v.decision, Decision::Approve);
        assert_eq!(v.reason, None);
        assert!(v.substitute.is_none());
    }

    #[test]
    fn over_abs_max_is_revised_then_substituted() {
        let rules = Rulebook::default();
        let p = proposal(150.0);
        let fb = feedback(125.0);
        let first = sc_validate(&p, &fb, &rules, &claimed(200.0), Lineage::FIRST);
        assert_eq!(first.decision, Decision::Revise);
        assert_eq!(first.reason, Some(SafetyRule::AbsMaxSpeed));

        let second = sc_validate(&p, &fb, &rules, &claimed(200.0), Lineage::FIRST.next());
        assert_eq!(second.decision, Decision::Substitute);
        let sub = second.substitute.unwrap();
        assert_eq!(sub.target_speed_kph, 130.0);
        assert!(first_violation(&sub, &fb, &rules, &claimed(200.0)).is_none());
    }

    #[test]
    fn claimed_limit_is_enforced() {
        let v = sc_validate(
            &proposal(90.0),
            &feedback(85.0),
            &Rulebook::default(),
            &claimed(40.0),
            Lineage::FIRST,
        );
        assert_eq!(v.reason, Some(SafetyRule::ClaimedLimit));
    }

    #[test]
    fn acceleration_is_one_sided() {
        let rules = Rulebook::default();
        // 0 -> 120 kph in 10 s is 3.33 m/s^2
        let up = sc_validate(
            &proposal(120.0),
            &feedback(0.0),
            &rules,
            &claimed(130.0),
            Lineage::FIRST,
        );
        assert_eq!(up.reason, Some(SafetyRule::Acceleration));
        let down = sc_validate(
            &proposal(5.0),
            &feedback(125.0),
            &rules,
            &claimed(130.0),
            Lineage::FIRST,
        );
        assert_eq!(down.decision, Decision::Approve);
    }

    #[test]
    fn max_reachable_speed_is_exactly_admissible() {
        let rules = Rulebook::default();
        for s in [0.0, 0.1, 33.3, 72.0, 99.99] {
            let v = rules.max_reachable_speed(s);
            assert!(Rulebook::implied_accel(s, v) <= rules.max_accel_mps2);
            assert!((v - (s + 108.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn short_headway_is_revised() {
        let mut p = proposal(50.0);
        p.headway_s = 0.6;
        let v = sc_validate(
            &p,
            &feedback(50.0),
            &Rulebook::default(),
            &claimed(80.0),
            Lineage::FIRST,
        );
        assert_eq!(v.reason, Some(SafetyRule::Headway));
    }

    #[test]
    fn highway_minimum_applies_only_on_highway() {
        let rules = Rulebook {
            min_speed_kph_on_highway: 60.0,
            ..Rulebook::default()
        };
        let slow = proposal(40.0);
        let on_hw = sc_validate(&slow, &feedback(40.0), &rules, &claimed(100.0), Lineage::FIRST);
        assert_eq!(on_hw.reason, Some(SafetyRule::MinSpeed));
        let urban = ClaimedContext {
            speed_limit_kph: 100.0,
            road_class: RoadClass::Urban,
        };
        let off_hw = sc_validate(&slow, &feedback(40.0), &rules, &urban, Lineage::FIRST);
        assert_eq!(off_hw.decision, Decision::Approve);
        // a posted limit below the minimum lowers the floor
        let low = sc_validate(&slow, &feedback(40.0), &rules, &claimed(30.0), Lineage::FIRST);
        assert_eq!(low.reason, Some(SafetyRule::ClaimedLimit));
    }

    #[test]
    fn verdicts_depend_only_on_arguments() {
        let rules = Rulebook::default();
        let p = proposal(150.0);
        let a = sc_validate(&p, &feedback(100.0), &rules, &claimed(130.0), Lineage::FIRST);
        let _ = sc_validate(
            &proposal(20.0),
            &feedback(10.0),
            &rules,
            &claimed(30.0),
            Lineage::FIRST.next(),
        );
        let b = sc_validate(&p, &feedback(100.0), &rules, &claimed(130.0), Lineage::FIRST);
        assert_eq!(a, b);
    }

    #[test]
    fn rulebook_validation() {
        assert!(Rulebook::default().validate().is_ok());
        let bad = Rulebook {
            max_accel_mps2: 0.0,
            ..Rulebook::default()
        };
        assert!(bad.validate().is_err());
    }
}
