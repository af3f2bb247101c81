//! Shared vocabulary: roles, agency levels, threat ids, message envelopes
//! and the context values that cross trust boundaries.
//!
//! Everything here is a plain value type. Envelopes carry both the real
//! `sender` and the `claimed_sender`; pipeline components only ever look at
//! the claimed one; the real sender is for the harness.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("agency level {0} outside [0,5]")]
    AgencyOutOfRange(i64),
    #[error("unknown {kind} `{value}`")]
    Unknown { kind: &'static str, value: String },
    #[error("provenance hop at step {step} does not follow last hop at step {last}")]
    NonMonotoneHop { last: u32, step: u32 },
    #[error("invalid {field}: {value} ({expected})")]
    OutOfRange {
        field: &'static str,
        value: f64,
        expected: &'static str,
    },
}

// ---------------------------------------------------------------------------
// Roles and authority
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Role {
    PersonalAgent,
    DrivingStrategyAgent,
    SafetyCheck,
    CavStack,
    User,
    External,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::PersonalAgent,
        Role::DrivingStrategyAgent,
        Role::SafetyCheck,
        Role::CavStack,
        Role::User,
        Role::External,
    ];

    pub fn short(self) -> &'static str {
        match self {
            Role::PersonalAgent => "PA",
            Role::DrivingStrategyAgent => "DSA",
            Role::SafetyCheck => "SC",
            Role::CavStack => "CAV",
            Role::User => "User",
            Role::External => "External",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

/// What kind of content an envelope is allowed to carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Authority {
    IntentOnly,
    ProposalOnly,
    VerdictOnly,
    ContextOnly,
}

/// Which authorities each (claimed) role may exercise. Admission is decided
/// on the claimed sender only.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DelegationTable {
    grants: BTreeMap<Role, BTreeSet<Authority>>,
}

impl Default for DelegationTable {
    fn default() -> Self {
        let mut grants = BTreeMap::new();
        for role in Role::ALL {
            let set: BTreeSet<Authority> = match role {
                Role::PersonalAgent | Role::User => [Authority::IntentOnly].into(),
                Role::DrivingStrategyAgent => [Authority::ProposalOnly].into(),
                Role::SafetyCheck => [Authority::VerdictOnly].into(),
                Role::CavStack => [Authority::ContextOnly].into(),
                Role::External => BTreeSet::new(),
            };
            grants.insert(role, set);
        }
        Self { grants }
    }
}

impl DelegationTable {
    pub fn allows(&self, role: Role, authority: Authority) -> bool {
        self.grants.get(&role).is_some_and(|set| set.contains(&authority))
    }

    /// Widens a role's permissions. Only privilege-compromise injections do this.
    pub fn grant(&mut self, role: Role, authority: Authority) {
        self.grants.entry(role).or_default().insert(authority);
    }

    pub fn admit<P>(&self, envelope: &MessageEnvelope<P>) -> Result<(), AdmissionError> {
        if self.allows(envelope.claimed_sender, envelope.authority) {
            Ok(())
        } else {
            Err(AdmissionError {
                claimed_sender: envelope.claimed_sender,
                authority: envelope.authority,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{claimed_sender} may not send {authority:?} messages")]
pub struct AdmissionError {
    pub claimed_sender: Role,
    pub authority: Authority,
}

// ---------------------------------------------------------------------------
// Agency levels and driving modes
// ---------------------------------------------------------------------------

/// Agent capability level, 0 (reactive tools) through 5 (general agents).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub struct AgencyLevel(u8);

impl AgencyLevel {
    pub fn new(level: i64) -> Result<Self, DomainError> {
        if (0..=5).contains(&level) {
            Ok(Self(level as u8))
        } else {
            Err(DomainError::AgencyOutOfRange(level))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }
}

impl TryFrom<i64> for AgencyLevel {
    type Error = DomainError;
    fn try_from(value: i64) -> Result<Self, Self::Error> {
        Self::new(value)
    }
}

impl From<AgencyLevel> for i64 {
    fn from(value: AgencyLevel) -> Self {
        value.0 as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AgencyBucket {
    Low,
    Medium,
    High,
}

impl AgencyBucket {
    pub const ALL: [AgencyBucket; 3] = [AgencyBucket::Low, AgencyBucket::Medium, AgencyBucket::High];
}

/// Levels 0-1 are Low, 2-3 Medium, 4-5 High.
pub fn agency_bucket(level: AgencyLevel) -> AgencyBucket {
    match level.get() {
        0 | 1 => AgencyBucket::Low,
        2 | 3 => AgencyBucket::Medium,
        _ => AgencyBucket::High,
    }
}

impl FromStr for AgencyBucket {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Self::Low),
            "medium" | "med" => Ok(Self::Medium),
            "high" => Ok(Self::High),
            _ => Err(DomainError::Unknown {
                kind: "agency bucket",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for AgencyBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DrivingMode {
    Manual,
    Autonomous,
}

impl DrivingMode {
    pub const ALL: [DrivingMode; 2] = [DrivingMode::Manual, DrivingMode::Autonomous];
}

impl FromStr for DrivingMode {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "manual" => Ok(Self::Manual),
            "autonomous" | "auto" => Ok(Self::Autonomous),
            _ => Err(DomainError::Unknown {
                kind: "driving mode",
                value: s.to_string(),
            }),
        }
    }
}

impl fmt::Display for DrivingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

// ---------------------------------------------------------------------------
// Threat identifiers
// ---------------------------------------------------------------------------

/// The fifteen agentic threats plus the four cross-layer vectors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ThreatId {
    T1,
    T2,
    T3,
    T4,
    T5,
    T6,
    T7,
    T8,
    T9,
    T10,
    T11,
    T12,
    T13,
    T14,
    T15,
    XPerception,
    XV2x,
    XCompute,
    XControlFeedback,
}

impl ThreatId {
    pub const ALL: [ThreatId; 19] = [
        ThreatId::T1,
        ThreatId::T2,
        ThreatId::T3,
        ThreatId::T4,
        ThreatId::T5,
        ThreatId::T6,
        ThreatId::T7,
        ThreatId::T8,
        ThreatId::T9,
        ThreatId::T10,
        ThreatId::T11,
        ThreatId::T12,
        ThreatId::T13,
        ThreatId::T14,
        ThreatId::T15,
        ThreatId::XPerception,
        ThreatId::XV2x,
        ThreatId::XCompute,
        ThreatId::XControlFeedback,
    ];

    /// T1..T15 only; these are the rows of the severity tables.
    pub const AGENTIC: [ThreatId; 15] = [
        ThreatId::T1,
        ThreatId::T2,
        ThreatId::T3,
        ThreatId::T4,
        ThreatId::T5,
        ThreatId::T6,
        ThreatId::T7,
        ThreatId::T8,
        ThreatId::T9,
        ThreatId::T10,
        ThreatId::T11,
        ThreatId::T12,
        ThreatId::T13,
        ThreatId::T14,
        ThreatId::T15,
    ];

    pub fn id(self) -> &'static str {
        match self {
            ThreatId::T1 => "T1",
            ThreatId::T2 => "T2",
            ThreatId::T3 => "T3",
            ThreatId::T4 => "T4",
            ThreatId::T5 => "T5",
            ThreatId::T6 => "T6",
            ThreatId::T7 => "T7",
            ThreatId::T8 => "T8",
            ThreatId::T9 => "T9",
            ThreatId::T10 => "T10",
            ThreatId::T11 => "T11",
            ThreatId::T12 => "T12",
            ThreatId::T13 => "T13",
            ThreatId::T14 => "T14",
            ThreatId::T15 => "T15",
            ThreatId::XPerception => "XPerception",
            ThreatId::XV2x => "XV2X",
            ThreatId::XCompute => "XCompute",
            ThreatId::XControlFeedback => "XControlFeedback",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ThreatId::T1 => "Memory Poisoning",
            ThreatId::T2 => "Tool Misuse",
            ThreatId::T3 => "Privilege Compromise",
            ThreatId::T4 => "Resource Overload",
            ThreatId::T5 => "Cascading Hallucinations",
            ThreatId::T6 => "Intent Breaking",
            ThreatId::T7 => "Misaligned & Deceptive Behaviors",
            ThreatId::T8 => "Repudiation & Untraceability",
            ThreatId::T9 => "Identity Spoofing",
            ThreatId::T10 => "Overwhelming Human-in-the-Loop",
            ThreatId::T11 => "Unexpected Remote Code Execution",
            ThreatId::T12 => "Agent Communication Poisoning",
            ThreatId::T13 => "Rogue Agents",
            ThreatId::T14 => "Human Attacks on Multi-Agent Systems",
            ThreatId::T15 => "Human Manipulation",
            ThreatId::XPerception => "Perception-Layer Attack",
            ThreatId::XV2x => "Communication-Layer (V2X) Manipulation",
            ThreatId::XCompute => "Computing/Decision-Layer Corruption",
            ThreatId::XControlFeedback => "Misleading Control Feedback",
        }
    }

    pub fn is_cross_layer(self) -> bool {
        matches!(
            self,
            ThreatId::XPerception | ThreatId::XV2x | ThreatId::XCompute | ThreatId::XControlFeedback
        )
    }
}

impl fmt::Display for ThreatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for ThreatId {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ThreatId::ALL
            .into_iter()
            .find(|t| t.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| DomainError::Unknown {
                kind: "threat id",
                value: s.to_string(),
            })
    }
}

impl TryFrom<String> for ThreatId {
    type Error = DomainError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<ThreatId> for String {
    fn from(value: ThreatId) -> Self {
        value.id().to_string()
    }
}

// ---------------------------------------------------------------------------
// Envelopes
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hop {
    pub role: Role,
    pub step: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageEnvelope<P> {
    pub sender: Role,
    pub claimed_sender: Role,
    pub authority: Authority,
    pub payload: P,
    provenance: Vec<Hop>,
    pub step: u32,
}

pub fn make_envelope<P>(sender: Role, authority: Authority, payload: P, step: u32) -> MessageEnvelope<P> {
    MessageEnvelope {
        sender,
        claimed_sender: sender,
        authority,
        payload,
        provenance: vec![Hop { role: sender, step }],
        step,
    }
}

impl<P> MessageEnvelope<P> {
    pub fn provenance(&self) -> &[Hop] {
        &self.provenance
    }

    /// Hops must advance in step; the list never shrinks.
    pub fn append_hop(&mut self, role: Role, step: u32) -> Result<(), DomainError> {
        let last = self.provenance.last().map(|h| h.step).unwrap_or(0);
        if step <= last {
            return Err(DomainError::NonMonotoneHop { last, step });
        }
        self.provenance.push(Hop { role, step });
        Ok(())
    }

    pub fn is_spoofed(&self) -> bool {
        self.sender != self.claimed_sender
    }
}

// ---------------------------------------------------------------------------
// Context and feedback
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RoadClass {
    Highway,
    Arterial,
    RingRoad,
    Residential,
    Urban,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SourceLayer {
    Perception,
    V2X,
    MapService,
    Fusion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hazard {
    pub kind: String,
    pub distance_m: f64,
    pub confidence: f64,
}

impl Hazard {
    pub fn validate(&self) -> Result<(), DomainError> {
        if !(self.distance_m >= 0.0 && self.distance_m.is_finite()) {
            return Err(DomainError::OutOfRange {
                field: "hazard.distance_m",
                value: self.distance_m,
                expected: ">= 0",
            });
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(DomainError::OutOfRange {
                field: "hazard.confidence",
                value: self.confidence,
                expected: "[0,1]",
            });
        }
        Ok(())
    }
}

pub const MAX_SPEED_LIMIT_KPH: f64 = 200.0;
/// Smallest representable posted limit after clamping an edited summary.
pub const MIN_SPEED_LIMIT_KPH: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextSummary {
    pub speed_limit_kph: f64,
    pub road_class: RoadClass,
    pub hazards: Vec<Hazard>,
    pub closures: Vec<String>,
    pub traffic_density: f64,
    pub source_layer: SourceLayer,
    pub completeness: f64,
}

impl ContextSummary {
    pub fn validate(&self) -> Result<(), DomainError> {
        if !(self.speed_limit_kph > 0.0 && self.speed_limit_kph <= MAX_SPEED_LIMIT_KPH) {
            return Err(DomainError::OutOfRange {
                field: "speed_limit_kph",
                value: self.speed_limit_kph,
                expected: "(0,200]",
            });
        }
        for (field, v) in [
            ("traffic_density", self.traffic_density),
            ("completeness", self.completeness),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(DomainError::OutOfRange {
                    field,
                    value: v,
                    expected: "[0,1]",
                });
            }
        }
        self.hazards.iter().try_for_each(Hazard::validate)
    }

    /// Pulls every numeric field back inside its invariant range. Edits are
    /// free to overshoot; the summary handed onward never does.
    pub fn clamp_to_invariants(&mut self) {
        self.speed_limit_kph = clamp_or(self.speed_limit_kph, MIN_SPEED_LIMIT_KPH, MAX_SPEED_LIMIT_KPH);
        self.traffic_density = clamp_or(self.traffic_density, 0.0, 1.0);
        self.completeness = clamp_or(self.completeness, 0.0, 1.0);
        for h in &mut self.hazards {
            h.confidence = clamp_or(h.confidence, 0.0, 1.0);
            h.distance_m = clamp_or(h.distance_m, 0.0, f64::MAX);
        }
    }

    /// Overload degradation: completeness shrinks by `factor` and the record
    /// lists are truncated to the retained fraction.
    pub fn degrade(&mut self, factor: f64) {
        self.completeness = clamp_or(self.completeness * factor, 0.0, 1.0);
        let keep = |n: usize, c: f64| (n as f64 * c).floor() as usize;
        let hz = keep(self.hazards.len(), self.completeness);
        self.hazards.truncate(hz);
        let cl = keep(self.closures.len(), self.completeness);
        self.closures.truncate(cl);
    }
}

fn clamp_or(v: f64, lo: f64, hi: f64) -> f64 {
    if v.is_nan() {
        lo
    } else {
        v.clamp(lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleFeedback {
    pub speed_kph: f64,
    pub accel_mps2: f64,
    pub steering_deg: f64,
    pub braking: f64,
    pub reported_by: String,
}

impl VehicleFeedback {
    pub fn new(
        speed_kph: f64,
        accel_mps2: f64,
        steering_deg: f64,
        braking: f64,
        reported_by: impl Into<String>,
    ) -> Result<Self, DomainError> {
        let fb = Self {
            speed_kph,
            accel_mps2,
            steering_deg,
            braking,
            reported_by: reported_by.into(),
        };
        fb.validate()?;
        Ok(fb)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if !(self.speed_kph >= 0.0 && self.speed_kph.is_finite()) {
            return Err(DomainError::OutOfRange {
                field: "speed_kph",
                value: self.speed_kph,
                expected: ">= 0",
            });
        }
        if !(0.0..=1.0).contains(&self.braking) {
            return Err(DomainError::OutOfRange {
                field: "braking",
                value: self.braking,
                expected: "[0,1]",
            });
        }
        Ok(())
    }

    pub fn clamp_to_invariants(&mut self) {
        self.speed_kph = clamp_or(self.speed_kph, 0.0, f64::MAX);
        self.braking = clamp_or(self.braking, 0.0, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn envelope_starts_with_single_hop() {
        let env = make_envelope(Role::PersonalAgent, Authority::IntentOnly, "intent", 0);
        assert_eq!(
            env.provenance(),
            &[Hop {
                role: Role::PersonalAgent,
                step: 0
            }]
        );
        assert_eq!(env.claimed_sender, env.sender);
        assert!(!env.is_spoofed());
    }

    #[test]
    fn hop_append_grows_and_rejects_backwards() {
        let mut env = make_envelope(Role::CavStack, Authority::ContextOnly, (), 0);
        env.append_hop(Role::DrivingStrategyAgent, 3).unwrap();
        assert_eq!(env.provenance().len(), 2);
        assert!(env.append_hop(Role::PersonalAgent, 3).is_err());
        assert_eq!(env.provenance().len(), 2);
    }

    #[test]
    fn safety_check_cannot_send_intent() {
        let table = DelegationTable::default();
        let env = make_envelope(Role::SafetyCheck, Authority::IntentOnly, (), 0);
        let err = table.admit(&env).unwrap_err();
        assert_eq!(err.claimed_sender, Role::SafetyCheck);
        let ok = make_envelope(Role::SafetyCheck, Authority::VerdictOnly, (), 0);
        assert!(table.admit(&ok).is_ok());
    }

    #[test]
    fn external_has_no_default_authority() {
        let table = DelegationTable::default();
        for a in [
            Authority::IntentOnly,
            Authority::ProposalOnly,
            Authority::VerdictOnly,
            Authority::ContextOnly,
        ] {
            assert!(!table.allows(Role::External, a));
        }
    }

    #[test]
    fn agency_bucket_boundaries() {
        let b = |l| agency_bucket(AgencyLevel::new(l).unwrap());
        assert_eq!(b(0), AgencyBucket::Low);
        assert_eq!(b(1), AgencyBucket::Low);
        assert_eq!(b(2), AgencyBucket::Medium);
        assert_eq!(b(3), AgencyBucket::Medium);
        assert_eq!(b(4), AgencyBucket::High);
        assert_eq!(b(5), AgencyBucket::High);
    }

    #[test]
    fn agency_bucket_is_monotone() {
        let levels: Vec<_> = (0..=5).map(|l| agency_bucket(AgencyLevel::new(l).unwrap())).collect();
        assert!(levels.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn agency_level_rejects_out_of_range() {
        assert!(AgencyLevel::new(-1).is_err());
        assert!(AgencyLevel::new(6).is_err());
        assert!(serde_json::from_str::<AgencyLevel>("7").is_err());
        assert_eq!(serde_json::from_str::<AgencyLevel>("4").unwrap().get(), 4);
    }

    #[test]
    fn threat_ids_round_trip_through_strings() {
        for t in ThreatId::ALL {
            assert_eq!(t.id().parse::<ThreatId>().unwrap(), t);
        }
        assert!("T99".parse::<ThreatId>().is_err());
    }

    #[test]
    fn degrade_scales_completeness_and_truncates() {
        let mut ctx = ContextSummary {
            speed_limit_kph: 90.0,
            road_class: RoadClass::Highway,
            hazards: vec![Hazard {
                kind: "debris".into(),
                distance_m: 80.0,
                confidence: 0.8,
            }],
            closures: vec!["R1".into(), "R2".into()],
            traffic_density: 0.2,
            source_layer: SourceLayer::Fusion,
            completeness: 1.0,
        };
        ctx.degrade(0.5);
        assert_eq!(ctx.completeness, 0.5);
        assert!(ctx.hazards.is_empty());
        assert_eq!(ctx.closures, vec!["R1".to_string()]);
    }

    #[test]
    fn feedback_construction_validates_ranges() {
        assert!(VehicleFeedback::new(-1.0, 0.0, 0.0, 0.0, "can").is_err());
        assert!(VehicleFeedback::new(10.0, 0.0, 0.0, 1.5, "can").is_err());
        assert!(VehicleFeedback::new(10.0, -2.0, 5.0, 0.3, "can").is_ok());
    }
}
