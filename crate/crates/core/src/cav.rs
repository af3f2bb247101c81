//! Simulated upstream CAV layers. Ground truth goes in, summaries come out;
//! attacks are declarative edits on the summaries and never touch the truth.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{ContextSummary, Hazard, RoadClass, SourceLayer, VehicleFeedback};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CavError {
    #[error("fusion needs at least one summary")]
    EmptyFusion,
    #[error("edit on `{field}` with {op:?}: {reason}")]
    InvalidEdit {
        field: EditField,
        op: EditOp,
        reason: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldTruth {
    pub true_speed_limit_kph: f64,
    #[serde(default)]
    pub true_hazards: Vec<Hazard>,
    #[serde(default)]
    pub true_closures: Vec<String>,
    pub road_class: RoadClass,
    pub vehicle_true_speed_kph: f64,
    #[serde(default)]
    pub traffic_density: f64,
}

impl WorldTruth {
    pub fn projection(&self, layer: SourceLayer) -> ContextSummary {
        ContextSummary {
            speed_limit_kph: self.true_speed_limit_kph,
            road_class: self.road_class,
            hazards: self.true_hazards.clone(),
            closures: self.true_closures.clone(),
            traffic_density: self.traffic_density,
            source_layer: layer,
            completeness: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), crate::domain::DomainError> {
        self.projection(SourceLayer::Fusion).validate()?;
        VehicleFeedback::new(self.vehicle_true_speed_kph, 0.0, 0.0, 0.0, "truth").map(|_| ())
    }
}

// ---------------------------------------------------------------------------
// Declarative edits
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditField {
    SpeedLimitKph,
    TrafficDensity,
    Completeness,
    Hazards,
    Closures,
    SpeedKph,
    AccelMps2,
    SteeringDeg,
    Braking,
}

impl std::fmt::Display for EditField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(|v| v.as_str()).unwrap_or("?"))
    }
}

impl EditField {
    pub fn on_feedback(self) -> bool {
        matches!(
            self,
            EditField::SpeedKph | EditField::AccelMps2 | EditField::SteeringDeg | EditField::Braking
        )
    }

    fn is_record(self) -> bool {
        matches!(self, EditField::Hazards | EditField::Closures)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditOp {
    Set,
    Add,
    Scale,
    InjectRecord,
    DropRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EditValue {
    Number(f64),
    Hazard(Hazard),
    Text(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldEdit {
    pub field: EditField,
    pub op: EditOp,
    pub value: EditValue,
}

impl FieldEdit {
    pub fn set(field: EditField, v: f64) -> Self {
        Self {
            field,
            op: EditOp::Set,
            value: EditValue::Number(v),
        }
    }

    pub fn add(field: EditField, v: f64) -> Self {
        Self {
            field,
            op: EditOp::Add,
            value: EditValue::Number(v),
        }
    }

    pub fn scale(field: EditField, v: f64) -> Self {
        Self {
            field,
            op: EditOp::Scale,
            value: EditValue::Number(v),
        }
    }

    pub fn inject_hazard(h: Hazard) -> Self {
        Self {
            field: EditField::Hazards,
            op: EditOp::InjectRecord,
            value: EditValue::Hazard(h),
        }
    }

    pub fn inject_closure(id: impl Into<String>) -> Self {
        Self {
            field: EditField::Closures,
            op: EditOp::InjectRecord,
            value: EditValue::Text(id.into()),
        }
    }

    /// Field/op/value compatibility; checked when a scenario is loaded.
    pub fn validate(&self, on_feedback: bool) -> Result<(), CavError> {
        let err = |reason| CavError::InvalidEdit {
            field: self.field,
            op: self.op,
            reason,
        };
        if self.field.on_feedback() != on_feedback {
            return Err(err(if on_feedback {
                "field is not part of vehicle feedback"
            } else {
                "field is not part of a context summary"
            }));
        }
        match (self.field.is_record(), self.op, &self.value) {
            (false, EditOp::Set | EditOp::Add | EditOp::Scale, EditValue::Number(v)) if v.is_finite() => Ok(()),
            (false, _, _) => Err(err("numeric fields take set/add/scale with a finite number")),
            (true, EditOp::InjectRecord, EditValue::Hazard(h)) if self.field == EditField::Hazards => {
                h.validate().map_err(|_| err("hazard record out of range"))
            }
            (true, EditOp::DropRecord, EditValue::Text(_)) => Ok(()),
            (true, EditOp::InjectRecord, EditValue::Text(_)) if self.field == EditField::Closures => Ok(()),
            (true, _, _) => Err(err(
                "record fields take inject_record/drop_record with a matching value",
            )),
        }
    }

    pub fn apply_to_summary(&self, s: &mut ContextSummary) {
        match self.field {
            EditField::SpeedLimitKph => s.speed_limit_kph = self.numeric(s.speed_limit_kph),
            EditField::TrafficDensity => s.traffic_density = self.numeric(s.traffic_density),
            EditField::Completeness => s.completeness = self.numeric(s.completeness),
            EditField::Hazards => match (&self.op, &self.value) {
                (EditOp::InjectRecord, EditValue::Hazard(h)) => s.hazards.push(h.clone()),
                (EditOp::DropRecord, EditValue::Text(kind)) => s.hazards.retain(|h| &h.kind != kind),
                _ => {}
            },
            EditField::Closures => match (&self.op, &self.value) {
                (EditOp::InjectRecord, EditValue::Text(id)) => {
                    if !s.closures.contains(id) {
                        s.closures.push(id.clone())
                    }
                }
                (EditOp::DropRecord, EditValue::Text(id)) => s.closures.retain(|c| c != id),
                _ => {}
            },
            _ => {}
        }
        s.clamp_to_invariants();
    }

    pub fn apply_to_feedback(&self, fb: &mut VehicleFeedback) {
        match self.field {
            EditField::SpeedKph => fb.speed_kph = self.numeric(fb.speed_kph),
            EditField::AccelMps2 => fb.accel_mps2 = self.numeric(fb.accel_mps2),
            EditField::SteeringDeg => fb.steering_deg = self.numeric(fb.steering_deg),
            EditField::Braking => fb.braking = self.numeric(fb.braking),
            _ => {}
        }
        fb.clamp_to_invariants();
    }

    fn numeric(&self, current: f64) -> f64 {
        let EditValue::Number(v) = self.value else {
            return current;
        };
        match self.op {
            EditOp::Set => v,
            EditOp::Add => current + v,
            EditOp::Scale => current * v,
            _ => current,
        }
    }
}

// ---------------------------------------------------------------------------
// Perturbations
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LayerTag {
    Perception,
    V2X,
    Compute,
    ControlFeedback,
}

impl LayerTag {
    pub const ALL: [LayerTag; 4] = [
        LayerTag::Perception,
        LayerTag::V2X,
        LayerTag::Compute,
        LayerTag::ControlFeedback,
    ];
}

/// Inclusive step window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "[u32; 2]", into = "[u32; 2]")]
pub struct Window {
    pub start: u32,
    pub end: u32,
}

impl Window {
    pub const ALWAYS: Window = Window {
        start: 0,
        end: u32::MAX,
    };

    pub fn new(start: u32, end: u32) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, step: u32) -> bool {
        self.start <= step && step <= self.end
    }
}

impl From<[u32; 2]> for Window {
    fn from([start, end]: [u32; 2]) -> Self {
        Self { start, end }
    }
}

impl From<Window> for [u32; 2] {
    fn from(w: Window) -> Self {
        [w.start, w.end]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerPerturbation {
    pub layer: LayerTag,
    pub transform: FieldEdit,
    pub active_window: Window,
}

impl LayerPerturbation {
    pub fn new(layer: LayerTag, transform: FieldEdit, active_window: Window) -> Self {
        Self {
            layer,
            transform,
            active_window,
        }
    }

    pub fn validate(&self) -> Result<(), CavError> {
        self.transform.validate(self.layer == LayerTag::ControlFeedback)
    }
}

fn apply_layers(summary: &mut ContextSummary, perturbations: &[LayerPerturbation], layers: &[LayerTag], step: u32) {
    for p in perturbations {
        if layers.contains(&p.layer) && p.active_window.contains(step) {
            p.transform.apply_to_summary(summary);
        }
    }
}

/// Onboard scene summary: perception then compute-layer edits, in list order.
pub fn perceive(world: &WorldTruth, perturbations: &[LayerPerturbation], step: u32) -> ContextSummary {
    let mut s = world.projection(SourceLayer::Fusion);
    apply_layers(&mut s, perturbations, &[LayerTag::Perception, LayerTag::Compute], step);
    s
}

pub fn v2x_broadcast(world: &WorldTruth, perturbations: &[LayerPerturbation], step: u32) -> ContextSummary {
    let mut s = world.projection(SourceLayer::V2X);
    apply_layers(&mut s, perturbations, &[LayerTag::V2X], step);
    s
}

/// Map/traffic service answer; reached by the personal agent as a tool call.
pub fn map_service(world: &WorldTruth) -> ContextSummary {
    let mut s = world.projection(SourceLayer::MapService);
    s.hazards.clear();
    s
}

pub fn control_feedback(world: &WorldTruth, perturbations: &[LayerPerturbation], step: u32) -> VehicleFeedback {
    let mut fb = VehicleFeedback {
        speed_kph: world.vehicle_true_speed_kph,
        accel_mps2: 0.0,
        steering_deg: 0.0,
        braking: 0.0,
        reported_by: "control".to_string(),
    };
    for p in perturbations {
        if p.layer == LayerTag::ControlFeedback && p.active_window.contains(step) {
            p.transform.apply_to_feedback(&mut fb);
        }
    }
    fb
}

/// Field-wise conservative merge: lowest limit, union of records, lowest
/// completeness, highest density.
pub fn fuse(summaries: &[ContextSummary]) -> Result<ContextSummary, CavError> {
    let (first, rest) = summaries.split_first().ok_or(CavError::EmptyFusion)?;
    let mut out = first.clone();
    out.source_layer = SourceLayer::Fusion;
    for s in rest {
        out.speed_limit_kph = out.speed_limit_kph.min(s.speed_limit_kph);
        out.completeness = out.completeness.min(s.completeness);
        out.traffic_density = out.traffic_density.max(s.traffic_density);
        for h in &s.hazards {
            if !out.hazards.contains(h) {
                out.hazards.push(h.clone());
            }
        }
        for c in &s.closures {
            if !out.closures.contains(c) {
                out.closures.push(c.clone());
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world(limit: f64) -> WorldTruth {
        WorldTruth {
            true_speed_limit_kph: limit,
            true_hazards: vec![],
            true_closures: vec![],
            road_class: RoadClass::Highway,
            vehicle_true_speed_kph: 72.0,
            traffic_density: 0.1,
        }
    }

    fn hazard(kind: &str, d: f64) -> Hazard {
        Hazard {
            kind: kind.into(),
            distance_m: d,
            confidence: 0.9,
        }
    }

    #[test]
    fn identity_without_perturbations() {
        let w = world(90.0);
        assert_eq!(perceive(&w, &[], 0), w.projection(SourceLayer::Fusion));
        assert_eq!(v2x_broadcast(&w, &[], 0), w.projection(SourceLayer::V2X));
        let fb = control_feedback(&w, &[], 0);
        assert_eq!(fb.speed_kph, 72.0);
        assert_eq!(fb.braking, 0.0);
    }

    #[test]
    fn phantom_hazard_injection() {
        let p = LayerPerturbation::new(
            LayerTag::Perception,
            FieldEdit::inject_hazard(hazard("phantom", 60.0)),
            Window::ALWAYS,
        );
        let s = perceive(&world(90.0), &[p], 0);
        assert_eq!(s.hazards, vec![hazard("phantom", 60.0)]);
    }

    #[test]
    fn scale_limit() {
        let p = LayerPerturbation::new(
            LayerTag::Compute,
            FieldEdit::scale(EditField::SpeedLimitKph, 0.5),
            Window::ALWAYS,
        );
        assert_eq!(perceive(&world(80.0), &[p], 0).speed_limit_kph, 40.0);
    }

    #[test]
    fn v2x_set_limit_and_closure() {
        let ps = [
            LayerPerturbation::new(
                LayerTag::V2X,
                FieldEdit::set(EditField::SpeedLimitKph, 40.0),
                Window::ALWAYS,
            ),
            LayerPerturbation::new(LayerTag::V2X, FieldEdit::inject_closure("R7"), Window::ALWAYS),
        ];
        let s = v2x_broadcast(&world(80.0), &ps, 0);
        assert_eq!(s.speed_limit_kph, 40.0);
        assert_eq!(s.closures, vec!["R7".to_string()]);
        // V2X edits do not leak into the onboard summary
        assert_eq!(perceive(&world(80.0), &ps, 0).speed_limit_kph, 80.0);
    }

    #[test]
    fn window_discipline() {
        let p = LayerPerturbation::new(
            LayerTag::V2X,
            FieldEdit::set(EditField::SpeedLimitKph, 40.0),
            Window::new(10, 20),
        );
        let w = world(80.0);
        assert_eq!(
            v2x_broadcast(&w, std::slice::from_ref(&p), 5),
            w.projection(SourceLayer::V2X)
        );
        assert_eq!(v2x_broadcast(&w, std::slice::from_ref(&p), 10).speed_limit_kph, 40.0);
        assert_eq!(v2x_broadcast(&w, std::slice::from_ref(&p), 21).speed_limit_kph, 80.0);
    }

    #[test]
    fn control_feedback_edits() {
        let w = world(90.0);
        let add = LayerPerturbation::new(
            LayerTag::ControlFeedback,
            FieldEdit::add(EditField::SpeedKph, -30.0),
            Window::ALWAYS,
        );
        assert_eq!(control_feedback(&w, &[add], 0).speed_kph, 42.0);
        let brake = LayerPerturbation::new(
            LayerTag::ControlFeedback,
            FieldEdit::set(EditField::Braking, 1.0),
            Window::ALWAYS,
        );
        assert_eq!(control_feedback(&w, &[brake], 0).braking, 1.0);
    }

    #[test]
    fn fusion_takes_min_limit_and_unions() {
        let w = world(90.0);
        let mut a = w.projection(SourceLayer::Perception);
        a.hazards = vec![hazard("a", 10.0)];
        let mut b = w.projection(SourceLayer::V2X);
        b.speed_limit_kph = 40.0;
        b.hazards = vec![hazard("b", 20.0), hazard("c", 30.0)];
        let f = fuse(&[a, b]).unwrap();
        assert_eq!(f.speed_limit_kph, 40.0);
        assert_eq!(f.hazards.len(), 3);
        assert_eq!(f.source_layer, SourceLayer::Fusion);
    }

    #[test]
    fn fusion_of_one_is_identity_up_to_tag() {
        let s = world(90.0).projection(SourceLayer::Fusion);
        assert_eq!(fuse(std::slice::from_ref(&s)).unwrap(), s);
        assert_eq!(fuse(&[]), Err(CavError::EmptyFusion));
    }

    #[test]
    fn edit_validation() {
        assert!(FieldEdit::set(EditField::SpeedLimitKph, 40.0).validate(false).is_ok());
        assert!(FieldEdit::set(EditField::SpeedKph, 40.0).validate(false).is_err());
        assert!(FieldEdit::set(EditField::Braking, 1.0).validate(true).is_ok());
        let bad = FieldEdit {
            field: EditField::Hazards,
            op: EditOp::Scale,
            value: EditValue::Number(2.0),
        };
        assert!(bad.validate(false).is_err());
        let closure_as_hazard = FieldEdit {
            field: EditField::Hazards,
            op: EditOp::InjectRecord,
            value: EditValue::Text("R7".into()),
        };
        assert!(closure_as_hazard.validate(false).is_err());
    }

    #[test]
    fn edits_are_clamped_to_invariants() {
        let p = LayerPerturbation::new(
            LayerTag::Perception,
            FieldEdit::add(EditField::SpeedLimitKph, -500.0),
            Window::ALWAYS,
        );
        let s = perceive(&world(80.0), &[p], 0);
        assert!(s.validate().is_ok());
    }
}
