//! Correspondence between maintained estimates and new percepts.

use std::fmt;

use crate::assignment::{solve_assignment, CostMatrix};
use crate::config::EngineConfig;
use crate::geometry::Vec2;
use crate::model::{Anchor, AnchorId, Attributes, Percept, WorldModel};

/// Something alignment can match a percept to: an anchored symbol or a
/// provisional candidate.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TrackKey {
    Anchor(AnchorId),
    Candidate(u64),
}

impl fmt::Display for TrackKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrackKey::Anchor(id) => write!(f, "{id}"),
            TrackKey::Candidate(k) => write!(f, "candidate#{k}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedPair {
    pub percept_id: u32,
    pub track: TrackKey,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlignmentResult {
    /// In percept order.
    pub matches: Vec<AlignedPair>,
    pub unmatched_percepts: Vec<u32>,
    pub unmatched_tracks: Vec<TrackKey>,
}

impl AlignmentResult {
    pub fn match_for(&self, track: &TrackKey) -> Option<&AlignedPair> {
        self.matches.iter().find(|m| &m.track == track)
    }
}

/// Displacement applied to every estimate when the viewport moves from
/// `pose_prev` to `pose_next`: objects shift opposite to the camera.
pub fn camera_shift(pose_prev: Vec2, pose_next: Vec2) -> Vec2 {
    -(pose_next - pose_prev)
}

pub fn compensate_camera_motion(anchors: &[Anchor], pose_prev: Vec2, pose_next: Vec2) -> Vec<Anchor> {
    let shift = camera_shift(pose_prev, pose_next);
    anchors
        .iter()
        .cloned()
        .map(|mut a| {
            a.attributes.position += shift;
            a
        })
        .collect()
}

/// Shifts every anchor and candidate of `model` in place and records the new pose.
pub fn compensate_model(model: &mut WorldModel, pose_next: Vec2) {
    let shift = camera_shift(model.camera_pose, pose_next);
    for a in &mut model.anchors {
        a.attributes.position += shift;
    }
    for c in &mut model.candidates {
        c.attributes.position += shift;
    }
    model.camera_pose = pose_next;
}

/// ψ × (‖Δpos‖² + ‖Δsize‖²), with ψ = 1 when types agree.
pub fn pair_cost(percept: &Attributes, estimate: &Attributes, config: &EngineConfig) -> f64 {
    let psi = if percept.object_type == estimate.object_type {
        1.0
    } else {
        config.psi_mismatch
    };
    psi * (percept.position.distance_squared(estimate.position)
        + percept.size.distance_squared(estimate.size))
}

/// Rows are percepts, columns are estimates.
pub fn build_cost_matrix(
    percepts: &[&Attributes],
    estimates: &[&Attributes],
    config: &EngineConfig,
) -> CostMatrix {
    let mut m = CostMatrix::zeros(percepts.len(), estimates.len());
    for (i, p) in percepts.iter().enumerate() {
        for (j, e) in estimates.iter().enumerate() {
            m.set(i, j, pair_cost(p, e, config));
        }
    }
    m
}

/// Aligns percepts to the estimates of `model` as they stand (no camera
/// compensation). The assignment minimises costs capped at τ; pairs at or
/// above τ come back as an unmatched percept and an unmatched track.
pub fn align_estimates(percepts: &[Percept], model: &WorldModel, config: &EngineConfig) -> AlignmentResult {
    let mut tracks: Vec<(TrackKey, &Attributes)> = model
        .anchors
        .iter()
        .map(|a| (TrackKey::Anchor(a.id.clone()), &a.attributes))
        .collect();
    tracks.extend(
        model
            .candidates
            .iter()
            .map(|c| (TrackKey::Candidate(c.key), &c.attributes)),
    );

    let percept_attrs: Vec<&Attributes> = percepts.iter().map(|p| &p.attributes).collect();
    let track_attrs: Vec<&Attributes> = tracks.iter().map(|(_, a)| *a).collect();
    let costs = build_cost_matrix(&percept_attrs, &track_attrs, config);
    // Capped at τ: a gated-out pair must not outweigh leaving both sides unmatched.
    let mut gated = costs.clone();
    gated.map_in_place(|c| c.min(config.tau));
    let solution = solve_assignment(&gated);

    let mut result = AlignmentResult::default();
    let mut track_used = vec![false; tracks.len()];
    let mut percept_used = vec![false; percepts.len()];
    for &(i, j) in &solution.pairs {
        let cost = costs.get(i, j);
        if cost < config.tau {
            result.matches.push(AlignedPair {
                percept_id: percepts[i].id,
                track: tracks[j].0.clone(),
                cost,
            });
            track_used[j] = true;
            percept_used[i] = true;
        }
    }
    result.unmatched_percepts = percepts
        .iter()
        .zip(&percept_used)
        .filter(|(_, used)| !**used)
        .map(|(p, _)| p.id)
        .collect();
    result.unmatched_tracks = tracks
        .into_iter()
        .zip(track_used)
        .filter(|(_, used)| !used)
        .map(|((k, _), _)| k)
        .collect();
    result
}

/// Camera compensation followed by thresholded optimal assignment.
pub fn align(percepts: &[Percept], model: &WorldModel, pose_next: Vec2, config: &EngineConfig) -> AlignmentResult {
    let mut compensated = model.clone();
    compensate_model(&mut compensated, pose_next);
    align_estimates(percepts, &compensated, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn attrs(t: &str, x: f64, y: f64, w: f64, h: f64) -> Attributes {
        Attributes::new(t, Vec2::new(x, y), Vec2::new(w, h))
    }

    fn model_with(anchors: Vec<Attributes>) -> WorldModel {
        let mut m = WorldModel::new();
        for a in anchors {
            let id = m.allocate_id(&a.object_type);
            m.anchors.push(Anchor::new(id, a, 1.0, 0));
        }
        m
    }

    #[test]
    fn zero_motion_leaves_positions() {
        let m = model_with(vec![attrs("cube", 100.0, 100.0, 10.0, 10.0)]);
        let out = compensate_camera_motion(&m.anchors, Vec2::new(3.0, 4.0), Vec2::new(3.0, 4.0));
        assert_eq!(out, m.anchors);
    }

    #[test]
    fn camera_right_moves_objects_left() {
        let m = model_with(vec![attrs("cube", 100.0, 100.0, 10.0, 10.0)]);
        let out = compensate_camera_motion(&m.anchors, Vec2::ZERO, Vec2::new(10.0, 0.0));
        assert_eq!(out[0].attributes.position, Vec2::new(90.0, 100.0));

        let m = model_with(vec![attrs("cube", 50.0, 50.0, 10.0, 10.0)]);
        let out = compensate_camera_motion(&m.anchors, Vec2::ZERO, Vec2::new(-5.0, 3.0));
        assert_eq!(out[0].attributes.position, Vec2::new(55.0, 47.0));
        assert_eq!(out[0].attributes.size, m.anchors[0].attributes.size);
    }

    #[test]
    fn cost_examples() {
        let cfg = EngineConfig {
            psi_mismatch: 5.0,
            ..EngineConfig::benchmark()
        };
        let anchor = attrs("snitch", 100.0, 100.0, 20.0, 20.0);
        assert_eq!(pair_cost(&anchor, &anchor, &cfg), 0.0);
        // (3² + 4²) + (0² + 2²)
        let percept = attrs("snitch", 103.0, 104.0, 20.0, 22.0);
        assert_eq!(pair_cost(&percept, &anchor, &cfg), 29.0);
        let wrong_type = attrs("cone", 103.0, 104.0, 20.0, 22.0);
        assert_eq!(pair_cost(&wrong_type, &anchor, &cfg), 145.0);
    }

    #[test]
    fn no_anchors_means_all_percepts_unmatched() {
        let percepts = vec![
            Percept::new(0, attrs("cube", 1.0, 1.0, 2.0, 2.0)),
            Percept::new(1, attrs("cube", 9.0, 9.0, 2.0, 2.0)),
        ];
        let r = align(&percepts, &WorldModel::new(), Vec2::ZERO, &EngineConfig::benchmark());
        assert!(r.matches.is_empty());
        assert_eq!(r.unmatched_percepts, vec![0, 1]);
        assert!(r.unmatched_tracks.is_empty());
    }

    #[test]
    fn near_percept_matches_far_one_does_not() {
        let cfg = EngineConfig::benchmark();
        let m = model_with(vec![attrs("cube", 100.0, 100.0, 20.0, 20.0)]);

        let near = vec![Percept::new(7, attrs("cube", 103.0, 100.0, 20.0, 20.0))];
        let r = align(&near, &m, Vec2::ZERO, &cfg);
        assert_eq!(r.matches.len(), 1);
        assert_eq!(r.matches[0].cost, 9.0);
        assert_eq!(r.matches[0].track, TrackKey::Anchor(AnchorId::from("cube0")));

        // 84² = 7056 ≥ 6500
        let far = vec![Percept::new(7, attrs("cube", 184.0, 100.0, 20.0, 20.0))];
        let r = align(&far, &m, Vec2::ZERO, &cfg);
        assert!(r.matches.is_empty());
        assert_eq!(r.unmatched_percepts, vec![7]);
        assert_eq!(r.unmatched_tracks, vec![TrackKey::Anchor(AnchorId::from("cube0"))]);
    }

    #[test]
    fn gated_pairs_do_not_displace_an_exact_match() {
        // Raw sums favour cube0-p2 plus cube1-p1 (4900 + 10000 < 0 + 28900),
        // but cube1-p1 is above τ, so the exact pair must win.
        let cfg = EngineConfig::benchmark();
        let m = model_with(vec![
            attrs("cube", 0.0, 0.0, 20.0, 20.0),
            attrs("cube", -100.0, 0.0, 20.0, 20.0),
        ]);
        let percepts = vec![
            Percept::new(1, attrs("cube", 0.0, 0.0, 20.0, 20.0)),
            Percept::new(2, attrs("cube", 70.0, 0.0, 20.0, 20.0)),
        ];
        let r = align(&percepts, &m, Vec2::ZERO, &cfg);
        assert_eq!(r.matches.len(), 1);
        assert_eq!(r.matches[0].percept_id, 1);
        assert_eq!(r.matches[0].track, TrackKey::Anchor(AnchorId::from("cube0")));
        assert_eq!(r.unmatched_percepts, vec![2]);
    }

    #[test]
    fn static_scene_under_camera_motion_matches_at_zero_cost() {
        let m = model_with(vec![
            attrs("cube", 100.0, 100.0, 20.0, 20.0),
            attrs("cone", 200.0, 50.0, 40.0, 40.0),
        ]);
        let shift = Vec2::new(12.5, -7.0);
        let percepts: Vec<Percept> = m
            .anchors
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let mut at = a.attributes.clone();
                at.position -= shift;
                Percept::new(i as u32, at)
            })
            .collect();
        let r = align(&percepts, &m, shift, &EngineConfig::benchmark());
        assert_eq!(r.matches.len(), 2);
        assert!(r.matches.iter().all(|p| p.cost == 0.0));
    }
}
