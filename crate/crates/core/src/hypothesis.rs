//! What happens to estimates that were not aligned this cycle: occlusion,
//! out-of-view, attachment, decay. Also confidence bookkeeping and the
//! attach/detach effects of agent actions.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{EngineConfig, Effect};
use crate::geometry::Vec2;
use crate::model::{ActionEvent, Anchor, AnchorId, AnchorStatus, Percept, WorldModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Matched,
    OccluderOverlap,
    OutsideFov,
    ParentFollow,
    Decay,
    Pruned,
    NewlyAnchored,
}

/// Per-anchor result of one engine cycle. `reason == Pruned` exactly when
/// `new_confidence < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisOutcome {
    pub anchor_id: AnchorId,
    pub new_status: AnchorStatus,
    pub new_confidence: f64,
    pub new_position: Vec2,
    pub reason: Reason,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceUpdate {
    pub confidence: f64,
    pub pruned: bool,
}

// Confidence lives on a 1e-9 grid so that k increments of 0.1 or 0.05 land
// exactly on thresholds such as 0.5 and 1.0.
fn snap(c: f64) -> f64 {
    (c * 1e9).round() / 1e9
}

/// Confidence after one cycle for an estimate currently holding `confidence`
/// and hypothesised `status`.
///
/// Aligned: `+conf_inc`, capped at 1. Not aligned and either below
/// `kappa_anch` or lost: `-conf_dec`, pruned when negative. Otherwise the
/// maintaining hypothesis keeps it unchanged.
pub fn next_confidence(
    confidence: f64,
    status: AnchorStatus,
    was_aligned: bool,
    config: &EngineConfig,
) -> ConfidenceUpdate {
    if was_aligned {
        return ConfidenceUpdate {
            confidence: snap(confidence + config.conf_inc).min(1.0),
            pruned: false,
        };
    }
    if confidence < config.kappa_anch || !status.is_maintaining() {
        let c = snap(confidence - config.conf_dec);
        return ConfidenceUpdate {
            confidence: c,
            pruned: c < 0.0,
        };
    }
    ConfidenceUpdate {
        confidence,
        pruned: false,
    }
}

pub fn update_confidence(anchor: &Anchor, was_aligned: bool, config: &EngineConfig) -> ConfidenceUpdate {
    next_confidence(anchor.confidence, anchor.status, was_aligned, config)
}

/// Status for an anchor that found no percept this cycle.
///
/// Precedence: attached, then occluded (its box overlaps a detection with
/// positive area), then out of view (center outside `[0,W)×[0,H)`), else lost.
pub fn classify_unmatched(anchor: &Anchor, percepts: &[Percept], config: &EngineConfig) -> AnchorStatus {
    if anchor.is_attached() {
        return AnchorStatus::Attached;
    }
    let bbox = anchor.bbox();
    if percepts.iter().any(|p| p.attributes.bbox().overlaps(&bbox)) {
        return AnchorStatus::Occluded;
    }
    let pos = anchor.attributes.position;
    let fov = config.field_of_view;
    let in_view = pos.x >= 0.0 && pos.x < fov.x && pos.y >= 0.0 && pos.y < fov.y;
    if !in_view {
        return AnchorStatus::OutOfView;
    }
    AnchorStatus::Lost
}

pub fn reason_for(status: AnchorStatus) -> Reason {
    match status {
        AnchorStatus::Visible => Reason::Matched,
        AnchorStatus::Occluded => Reason::OccluderOverlap,
        AnchorStatus::OutOfView => Reason::OutsideFov,
        AnchorStatus::Attached => Reason::ParentFollow,
        AnchorStatus::Lost => Reason::Decay,
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ActionError {
    #[error("unknown anchor `{0}`")]
    UnknownAnchor(String),
    #[error("attachment cycle: attaching {child} to {parent}")]
    AttachmentCycle { child: AnchorId, parent: AnchorId },
    #[error("action `{action}` has no argument at index {index}")]
    MissingArgument { action: String, index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub enum AppliedEffect {
    Attached { child: AnchorId, parent: AnchorId },
    Detached { child: AnchorId },
}

/// Resolves an action argument to an anchor.
///
/// Accepts a literal anchor id (`cone3`) or a located reference
/// `type@x,y` with an optional size suffix `:w,h`. A located reference
/// picks the anchor of that type with the smallest squared attribute
/// distance (position, plus size when given) below τ, ties to the smaller
/// id. The size suffix separates nested containers sharing a center.
pub fn resolve_anchor_ref(model: &WorldModel, reference: &str, config: &EngineConfig) -> Option<AnchorId> {
    let literal = AnchorId::from(reference);
    if model.anchor(&literal).is_some() {
        return Some(literal);
    }
    let (object_type, rest) = reference.split_once('@')?;
    let (coords, size) = match rest.split_once(':') {
        Some((c, s)) => (c, Some(parse_pair(s)?)),
        None => (rest, None),
    };
    let at = parse_pair(coords)?;
    model
        .anchors
        .iter()
        .filter(|a| a.attributes.object_type == object_type)
        .map(|a| {
            let d = a.attributes.position.distance_squared(at)
                + size.map_or(0.0, |s| a.attributes.size.distance_squared(s));
            (d, &a.id)
        })
        .filter(|(d, _)| *d < config.tau)
        .min_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)))
        .map(|(_, id)| id.clone())
}

/// Formats a located reference understood by [`resolve_anchor_ref`].
pub fn located_ref(object_type: &str, position: Vec2, size: Option<Vec2>) -> String {
    match size {
        Some(s) => format!("{object_type}@{},{}:{},{}", position.x, position.y, s.x, s.y),
        None => format!("{object_type}@{},{}", position.x, position.y),
    }
}

fn parse_pair(s: &str) -> Option<Vec2> {
    let (x, y) = s.split_once(',')?;
    Some(Vec2::new(x.trim().parse().ok()?, y.trim().parse().ok()?))
}

fn argument(event: &ActionEvent, index: usize) -> Result<&str, ActionError> {
    event
        .args
        .get(index)
        .map(String::as_str)
        .ok_or_else(|| ActionError::MissingArgument {
            action: event.name.clone(),
            index,
        })
}

/// Applies the rule registered for `event.name`, if any.
///
/// Returns `Ok(None)` when no rule matches. On error the model is left untouched.
pub fn apply_action(
    model: &mut WorldModel,
    event: &ActionEvent,
    config: &EngineConfig,
) -> Result<Option<AppliedEffect>, ActionError> {
    let Some(rule) = config.rule_for(&event.name) else {
        return Ok(None);
    };
    let resolve = |model: &WorldModel, index: usize| -> Result<AnchorId, ActionError> {
        let arg = argument(event, index)?;
        resolve_anchor_ref(model, arg, config).ok_or_else(|| ActionError::UnknownAnchor(arg.to_owned()))
    };

    match rule.effect {
        Effect::Attach { child, parent } => {
            let child = resolve(model, child)?;
            let parent = resolve(model, parent)?;
            if model.is_ancestor_or_self(&child, &parent) {
                return Err(ActionError::AttachmentCycle { child, parent });
            }
            let parent_pos = model
                .anchor(&parent)
                .map(|p| p.attributes.position)
                .expect("resolved parent exists");
            let c = model.anchor_mut(&child).expect("resolved child exists");
            // A second attach replaces the old parent: one parent per object.
            c.parent = Some(parent.clone());
            c.parent_offset = Some(c.attributes.position - parent_pos);
            c.status = AnchorStatus::Attached;
            Ok(Some(AppliedEffect::Attached { child, parent }))
        }
        Effect::Detach { child } => {
            let child = resolve(model, child)?;
            let c = model.anchor_mut(&child).expect("resolved child exists");
            if c.is_attached() {
                c.clear_parent();
                // Recomputed by the next classification; a freshly released
                // object is usually still under its former container.
                c.status = AnchorStatus::Occluded;
            }
            Ok(Some(AppliedEffect::Detached { child }))
        }
    }
}

/// Moves every attached anchor to `parent position + offset`, parents first.
pub fn propagate_attachments(model: &mut WorldModel) {
    let mut order: Vec<(usize, usize)> = model
        .anchors
        .iter()
        .enumerate()
        .filter(|(_, a)| a.is_attached())
        .filter_map(|(i, a)| model.depth(&a.id).map(|d| (d, i)))
        .collect();
    order.sort_unstable();
    for (_, i) in order {
        let (Some(parent), Some(offset)) = (model.anchors[i].parent.clone(), model.anchors[i].parent_offset) else {
            continue;
        };
        if let Some(p) = model.anchor(&parent).map(|p| p.attributes.position) {
            model.anchors[i].attributes.position = p + offset;
        }
    }
}
