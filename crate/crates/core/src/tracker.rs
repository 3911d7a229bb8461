//! One anchoring cycle per frame, plus the read-side queries over the
//! resulting world model.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use crate::alignment::{align_estimates, compensate_model, TrackKey};
use crate::config::{ConfigError, EngineConfig};
use crate::geometry::{BBox, Vec2};
use crate::hypothesis::{
    apply_action, classify_unmatched, next_confidence, propagate_attachments, reason_for, ActionError,
    HypothesisOutcome, Reason,
};
use crate::model::{ActionEvent, Anchor, AnchorId, AnchorStatus, Candidate, Percept, WorldModel};

/// Everything the engine receives for one frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Frame {
    pub index: u64,
    /// Viewport translation in the world frame.
    pub camera: Vec2,
    pub percepts: Vec<Percept>,
    pub actions: Vec<ActionEvent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectedAction {
    pub event: ActionEvent,
    pub error: ActionError,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StepReport {
    pub outcomes: Vec<HypothesisOutcome>,
    pub rejected_actions: Vec<RejectedAction>,
}

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("frame index {got} does not follow previous frame {previous}")]
    NonMonotoneFrame { previous: u64, got: u64 },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

/// Runs one cycle: camera compensation, action effects, alignment, matched
/// updates, attachment propagation, hypotheses for the rest, decay and
/// pruning, and finally new candidates for unexplained percepts.
pub fn step(model: &WorldModel, frame: &Frame, config: &EngineConfig) -> Result<(WorldModel, StepReport), TrackError> {
    if let Some(previous) = model.frame_index {
        if frame.index <= previous {
            return Err(TrackError::NonMonotoneFrame {
                previous,
                got: frame.index,
            });
        }
    }
    let mut m = model.clone();
    let mut report = StepReport::default();

    if model.frame_index.is_some() {
        compensate_model(&mut m, frame.camera);
    } else {
        m.camera_pose = frame.camera;
    }

    for event in &frame.actions {
        if let Err(error) = apply_action(&mut m, event, config) {
            report.rejected_actions.push(RejectedAction {
                event: event.clone(),
                error,
            });
        }
    }

    let alignment = align_estimates(&frame.percepts, &m, config);
    let percepts: HashMap<u32, &Percept> = frame.percepts.iter().map(|p| (p.id, p)).collect();

    let mut matched: HashSet<AnchorId> = HashSet::new();
    let mut matched_candidates: HashSet<u64> = HashSet::new();
    for pair in &alignment.matches {
        let percept = percepts[&pair.percept_id];
        match &pair.track {
            TrackKey::Anchor(id) => {
                let a = m.anchor_mut(id).expect("aligned anchor exists");
                a.attributes = percept.attributes.clone();
                a.status = AnchorStatus::Visible;
                a.last_seen_frame = frame.index;
                // re-detected child: resumes independent tracking
                a.clear_parent();
                a.confidence = next_confidence(a.confidence, a.status, true, config).confidence;
                matched.insert(id.clone());
            }
            TrackKey::Candidate(key) => {
                let c = m
                    .candidates
                    .iter_mut()
                    .find(|c| c.key == *key)
                    .expect("aligned candidate exists");
                c.attributes = percept.attributes.clone();
                c.last_seen_frame = frame.index;
                c.confidence = next_confidence(c.confidence, AnchorStatus::Visible, true, config).confidence;
                matched_candidates.insert(*key);
            }
        }
    }

    // Promote candidates that crossed the anchoring threshold, oldest first.
    let mut promoted = Vec::new();
    let mut remaining = Vec::with_capacity(m.candidates.len());
    let candidates = std::mem::take(&mut m.candidates);
    for c in candidates {
        if matched_candidates.contains(&c.key) && c.confidence >= config.kappa_anch {
            promoted.push(c);
        } else {
            remaining.push(c);
        }
    }
    m.candidates = remaining;
    for c in promoted {
        let id = m.allocate_id(&c.attributes.object_type);
        m.anchors.push(Anchor::new(id.clone(), c.attributes, c.confidence, frame.index));
        matched.insert(id);
    }

    propagate_attachments(&mut m);

    let mut pruned: HashSet<AnchorId> = HashSet::new();
    for a in m.anchors.iter_mut().filter(|a| !matched.contains(&a.id)) {
        let status = if a.is_attached() {
            AnchorStatus::Attached
        } else if a.confidence < config.kappa_anch {
            AnchorStatus::Lost
        } else {
            classify_unmatched(a, &frame.percepts, config)
        };
        a.status = status;
        let update = next_confidence(a.confidence, status, false, config);
        a.confidence = update.confidence;
        if update.pruned {
            pruned.insert(a.id.clone());
        }
    }

    if !pruned.is_empty() {
        for a in m.anchors.iter().filter(|a| pruned.contains(&a.id)) {
            report.outcomes.push(HypothesisOutcome {
                anchor_id: a.id.clone(),
                new_status: a.status,
                new_confidence: a.confidence,
                new_position: a.attributes.position,
                reason: Reason::Pruned,
            });
        }
        m.anchors.retain(|a| !pruned.contains(&a.id));
        // Children of pruned parents fall back to geometric hypotheses.
        let orphans: Vec<usize> = (0..m.anchors.len())
            .filter(|&i| {
                m.anchors[i]
                    .parent
                    .as_ref()
                    .is_some_and(|p| pruned.contains(p))
            })
            .collect();
        for i in orphans {
            m.anchors[i].clear_parent();
            let status = classify_unmatched(&m.anchors[i], &frame.percepts, config);
            m.anchors[i].status = status;
        }
    }

    for a in &m.anchors {
        let reason = if a.last_seen_frame == frame.index && a.status == AnchorStatus::Visible {
            if a.confidence >= config.kappa_anch && !model.anchors.iter().any(|old| old.id == a.id) {
                Reason::NewlyAnchored
            } else {
                Reason::Matched
            }
        } else if a.confidence < config.kappa_anch {
            Reason::Decay
        } else {
            reason_for(a.status)
        };
        report.outcomes.push(HypothesisOutcome {
            anchor_id: a.id.clone(),
            new_status: a.status,
            new_confidence: a.confidence,
            new_position: a.attributes.position,
            reason,
        });
    }

    m.candidates.retain_mut(|c| {
        if matched_candidates.contains(&c.key) {
            return true;
        }
        let update = next_confidence(c.confidence, AnchorStatus::Lost, false, config);
        c.confidence = update.confidence;
        !update.pruned
    });

    for id in &alignment.unmatched_percepts {
        let key = m.allocate_candidate_key();
        m.candidates.push(Candidate {
            key,
            attributes: percepts[id].attributes.clone(),
            confidence: 0.0,
            last_seen_frame: frame.index,
        });
    }

    m.frame_index = Some(frame.index);
    debug_assert!(
        crate::model::validate_world_model(&m).is_empty(),
        "{:?}",
        crate::model::validate_world_model(&m)
    );
    Ok((m, report))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryLevel {
    /// Confidence ≥ kappa_anch.
    Anchored,
    /// Confidence ≥ kappa_inf.
    Inferable,
}

pub fn query<'a>(model: &'a WorldModel, config: &EngineConfig, level: QueryLevel) -> Vec<&'a Anchor> {
    let threshold = match level {
        QueryLevel::Anchored => config.kappa_anch,
        QueryLevel::Inferable => config.kappa_inf,
    };
    model.anchors.iter().filter(|a| a.confidence >= threshold).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Relation {
    Attached { child: AnchorId, parent: AnchorId },
    Overlaps(AnchorId, AnchorId),
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Relation::Attached { child, parent } => write!(f, "attached({child},{parent})"),
            Relation::Overlaps(a, b) => write!(f, "overlaps({a},{b})"),
        }
    }
}

/// Attachment edges, then positive-area overlaps between inferable anchors,
/// each group ordered by anchor id.
pub fn infer_relations(model: &WorldModel, config: &EngineConfig) -> Vec<Relation> {
    let mut attached: Vec<Relation> = model
        .anchors
        .iter()
        .filter_map(|a| {
            a.parent.as_ref().map(|p| Relation::Attached {
                child: a.id.clone(),
                parent: p.clone(),
            })
        })
        .collect();
    attached.sort();

    let mut inferable = query(model, config, QueryLevel::Inferable);
    inferable.sort_by(|a, b| a.id.cmp(&b.id));
    let mut overlaps = Vec::new();
    for (i, a) in inferable.iter().enumerate() {
        for b in &inferable[i + 1..] {
            if a.bbox().overlaps(&b.bbox()) {
                overlaps.push(Relation::Overlaps(a.id.clone(), b.id.clone()));
            }
        }
    }
    attached.extend(overlaps);
    attached
}

/// Best current box for the object of `target_type`.
///
/// Prefers the most confident anchored estimate. Before the target is
/// anchored, a candidate detected in the current frame is reported so the
/// world model stays complete from the first observation.
pub fn predict_target(model: &WorldModel, config: &EngineConfig, target_type: &str) -> Option<BBox> {
    let anchored = model
        .anchors
        .iter()
        .filter(|a| a.attributes.object_type == target_type && a.confidence >= config.kappa_anch)
        .max_by(|a, b| a.confidence.total_cmp(&b.confidence).then_with(|| b.id.cmp(&a.id)));
    if let Some(a) = anchored {
        return Some(a.bbox());
    }
    let frame = model.frame_index?;
    model
        .candidates
        .iter()
        .filter(|c| c.attributes.object_type == target_type && c.last_seen_frame == frame)
        .max_by(|a, b| a.confidence.total_cmp(&b.confidence).then_with(|| b.key.cmp(&a.key)))
        .map(|c| c.attributes.bbox())
}

/// An engine instance bound to one stream.
#[derive(Debug, Clone)]
pub struct Engine {
    config: EngineConfig,
    model: WorldModel,
}

impl Engine {
    pub fn new(config: EngineConfig) -> Result<Self, TrackError> {
        config.validate()?;
        Ok(Self {
            config,
            model: WorldModel::new(),
        })
    }

    pub fn step(&mut self, frame: &Frame) -> Result<StepReport, TrackError> {
        let (model, report) = step(&self.model, frame, &self.config)?;
        self.model = model;
        Ok(report)
    }

    pub fn world(&self) -> &WorldModel {
        &self.model
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn query(&self, level: QueryLevel) -> Vec<&Anchor> {
        query(&self.model, &self.config, level)
    }

    pub fn relations(&self) -> Vec<Relation> {
        infer_relations(&self.model, &self.config)
    }
}

/// A tracker that predicts one target box per frame.
pub trait TargetTracker {
    fn observe(&mut self, frame: &Frame) -> Result<Option<BBox>, TrackError>;
}

/// Feeds every frame to `tracker` and collects its per-frame predictions.
pub fn run_tracker<T: TargetTracker + ?Sized>(tracker: &mut T, frames: &[Frame]) -> Result<Vec<Option<BBox>>, TrackError> {
    frames.iter().map(|f| tracker.observe(f)).collect()
}

pub struct AapaTracker {
    engine: Engine,
    target: String,
}

impl AapaTracker {
    pub fn new(config: EngineConfig, target: impl Into<String>) -> Result<Self, TrackError> {
        Ok(Self {
            engine: Engine::new(config)?,
            target: target.into(),
        })
    }

    pub fn engine(&self) -> &Engine {
        &self.engine
    }
}

impl TargetTracker for AapaTracker {
    fn observe(&mut self, frame: &Frame) -> Result<Option<BBox>, TrackError> {
        self.engine.step(frame)?;
        Ok(predict_target(self.engine.world(), self.engine.config(), &self.target))
    }
}
