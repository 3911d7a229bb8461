//! Object-permanence tracking by perceptual anchoring.
//!
//! Percepts from a detector are aligned to maintained symbols (anchors);
//! anchors that lose their percept persist under occlusion, outside the
//! field of view, or attached to a container whose motion they follow.

pub mod alignment;
pub mod assignment;
pub mod config;
pub mod eval;
pub mod geometry;
pub mod heuristic;
pub mod io;
pub mod hypothesis;
pub mod model;
pub mod sim;
pub mod tracker;

pub use alignment::{align, compensate_camera_motion, AlignmentResult, TrackKey};
pub use assignment::{solve_assignment, Assignment, CostMatrix};
pub use config::{ActionRule, ConfigError, Effect, EngineConfig};
pub use eval::{iou, l2_center, Bucket, Subtask, SubtaskRow};
pub use geometry::{BBox, Vec2};
pub use heuristic::HeuristicTracker;
pub use hypothesis::{apply_action, update_confidence, ActionError, HypothesisOutcome, Reason};
pub use model::{
    validate_world_model, ActionEvent, Anchor, AnchorId, AnchorStatus, Attributes, Percept, Violation,
    ViolationKind, WorldModel,
};
pub use tracker::{
    predict_target, run_tracker, step, AapaTracker, Engine, Frame, QueryLevel, StepReport, TargetTracker, TrackError,
};
