//! Programmed baseline: follow the target while it is detected, otherwise
//! predict whichever detection lies closest to where the target was last seen.

use crate::geometry::{BBox, Vec2};
use crate::model::Percept;
use crate::tracker::{Frame, TargetTracker, TrackError};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HeuristicState {
    pub last_known: Option<Vec2>,
    pub prediction: Option<BBox>,
}

fn closest(percepts: &[Percept], to: Vec2, filter: impl Fn(&Percept) -> bool) -> Option<&Percept> {
    percepts
        .iter()
        .filter(|p| filter(p))
        .min_by(|a, b| {
            let da = a.attributes.position.distance_squared(to);
            let db = b.attributes.position.distance_squared(to);
            da.total_cmp(&db).then_with(|| a.id.cmp(&b.id))
        })
}

/// One frame of the baseline. Ties go to the lowest percept id; an empty
/// frame repeats the previous prediction.
pub fn heuristic_step(state: &mut HeuristicState, percepts: &[Percept], target_type: &str) -> Option<BBox> {
    let is_target = |p: &Percept| p.attributes.object_type == target_type;
    let reference = state.last_known.unwrap_or(Vec2::ZERO);
    if let Some(t) = closest(percepts, reference, is_target) {
        state.last_known = Some(t.attributes.position);
        state.prediction = Some(t.attributes.bbox());
    } else if let Some(last) = state.last_known {
        if let Some(p) = closest(percepts, last, |_| true) {
            state.prediction = Some(p.attributes.bbox());
        }
    }
    state.prediction
}

#[derive(Debug, Clone)]
pub struct HeuristicTracker {
    state: HeuristicState,
    target: String,
}

impl HeuristicTracker {
    pub fn new(target: impl Into<String>) -> Self {
        Self {
            state: HeuristicState::default(),
            target: target.into(),
        }
    }
}

impl TargetTracker for HeuristicTracker {
    fn observe(&mut self, frame: &Frame) -> Result<Option<BBox>, TrackError> {
        Ok(heuristic_step(&mut self.state, &frame.percepts, &self.target))
    }
}
