use crate::eval::Subtask;
use crate::geometry::{covered_area, BBox, Vec2};

use super::{ScenarioRecord, TruthObject, TARGET_ID};

const MOTION_EPS: f64 = 1e-6;

/// Whether a perfect detector reports `object`: not inside a container,
/// center inside the viewport, and at most `threshold` of its area covered
/// by uncontained objects drawn above it.
pub fn is_detectable(object: &TruthObject, scene: &[TruthObject], viewport: Vec2, threshold: f64) -> bool {
    if object.parent.is_some() {
        return false;
    }
    let c = object.pos;
    if !(c.x >= 0.0 && c.x < viewport.x && c.y >= 0.0 && c.y < viewport.y) {
        return false;
    }
    let own = object.bbox();
    let covers: Vec<BBox> = scene
        .iter()
        .filter(|o| o.parent.is_none() && o.z > object.z && o.id != object.id)
        .map(TruthObject::bbox)
        .collect();
    covered_area(&own, &covers) <= threshold * own.area()
}

fn world_pos(record: &ScenarioRecord, frame: usize, id: &str) -> Option<Vec2> {
    let f = record.truth.get(frame)?;
    f.object(id).map(|o| o.pos + f.camera)
}

fn moved(record: &ScenarioRecord, id: &str, a: usize, b: usize) -> bool {
    match (world_pos(record, a, id), world_pos(record, b, id)) {
        (Some(p), Some(q)) => p.distance(q) > MOTION_EPS,
        _ => false,
    }
}

/// Recomputes the target's subtask label in every frame from the recorded
/// trajectories and containment state alone.
///
/// contained: held by a container. carried: contained while some
/// container up the chain moves into or out of this frame. occluded: not
/// contained and not detectable. visible: everything else.
pub fn derive_labels(record: &ScenarioRecord) -> Vec<Subtask> {
    let viewport = record.config.viewport;
    let threshold = record.config.occlusion_threshold;
    (0..record.truth.len())
        .map(|t| {
            let frame = &record.truth[t];
            let target = frame.object(TARGET_ID).expect("target present");
            if target.parent.is_none() {
                return if is_detectable(target, &frame.objects, viewport, threshold) {
                    Subtask::Visible
                } else {
                    Subtask::Occluded
                };
            }
            let mut ancestor = target.parent.clone();
            let mut hops = 0;
            while let Some(id) = ancestor {
                let before = t > 0 && moved(record, &id, t - 1, t);
                let after = moved(record, &id, t, t + 1);
                if before || after {
                    return Subtask::Carried;
                }
                hops += 1;
                if hops > frame.objects.len() {
                    break;
                }
                ancestor = frame.object(&id).and_then(|o| o.parent.clone());
            }
            Subtask::Contained
        })
        .collect()
}
