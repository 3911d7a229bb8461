use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::geometry::Vec2;
use crate::model::{Attributes, Percept};
use crate::tracker::Frame;

use super::NoiseConfig;

/// Percept ids at or above this value belong to ghosts.
pub const GHOST_ID_BASE: u32 = 10_000;

const NOISE_STREAM: u64 = 0x6e6f_6973_6521;
const PLACEMENT_TRIES: usize = 64;

struct Ghost {
    id: u32,
    attributes: Attributes,
    remaining: u64,
}

/// Applies miss bursts, ghost detections and center jitter.
///
/// A detection that starts a miss (probability `miss_rate`) stays missing
/// for `flicker_burst_length` frames. Each frame spawns at most one ghost
/// (probability `ghost_rate`) that lives `1..=ghost_frames` frames at a
/// fixed place, kept `ghost_clearance` away from real detections within
/// `ghost_memory` frames of its lifetime and from ghosts of that window; a
/// ghost with no free spot is not spawned. Deterministic in `seed`;
/// all-zero rates return the input.
pub fn corrupt(frames: &[Frame], noise: &NoiseConfig, viewport: Vec2, seed: u64) -> Vec<Frame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ NOISE_STREAM);
    let jitter = (noise.jitter_sigma > 0.0).then(|| Normal::new(0.0, noise.jitter_sigma).expect("finite sigma"));
    let mut missing: HashMap<u32, u64> = HashMap::new();
    let mut ghosts: Vec<Ghost> = Vec::new();
    let mut next_ghost = GHOST_ID_BASE;
    let mut recent: Vec<(usize, Vec2)> = Vec::new();
    let memory = ghost_memory(noise);

    frames
        .iter()
        .enumerate()
        .map(|(t, frame)| {
            let mut percepts = Vec::with_capacity(frame.percepts.len() + 1);
            for p in &frame.percepts {
                let left = missing.entry(p.id).or_insert(0);
                if *left > 0 {
                    *left -= 1;
                    continue;
                }
                if noise.miss_rate > 0.0 && rng.random_bool(noise.miss_rate) {
                    *left = noise.flicker_burst_length - 1;
                    continue;
                }
                percepts.push(p.clone());
            }
            // Bursts run on frame time, also while the object is not detectable.
            for (id, left) in missing.iter_mut() {
                if *left > 0 && !frame.percepts.iter().any(|p| p.id == *id) {
                    *left -= 1;
                }
            }

            if noise.ghost_rate > 0.0 && rng.random_bool(noise.ghost_rate) {
                let kind = &noise.ghost_types[rng.random_range(0..noise.ghost_types.len())];
                let side = rng.random_range(12.0..40.0);
                let size = Vec2::new(side, side * rng.random_range(0.8..1.25));
                let life = rng.random_range(1..=noise.ghost_frames);
                let lo = t.saturating_sub(memory);
                let hi = (t + life as usize + memory).min(frames.len());
                recent.retain(|&(born, _)| born + memory + noise.ghost_frames as usize > t);
                let clear = |pos: Vec2| {
                    let r2 = noise.ghost_clearance * noise.ghost_clearance;
                    frames[lo..hi]
                        .iter()
                        .flat_map(|f| &f.percepts)
                        .map(|p| p.attributes.position)
                        .chain(recent.iter().map(|&(_, g)| g))
                        .all(|q| q.distance_squared(pos) >= r2)
                };
                let spot = (0..PLACEMENT_TRIES)
                    .map(|_| Vec2::new(rng.random_range(0.0..viewport.x), rng.random_range(0.0..viewport.y)))
                    .find(|&pos| noise.ghost_clearance == 0.0 || clear(pos));
                if let Some(pos) = spot {
                    recent.push((t, pos));
                    ghosts.push(Ghost {
                        id: next_ghost,
                        attributes: Attributes::new(kind.clone(), pos, size),
                        remaining: life,
                    });
                    next_ghost += 1;
                }
            }
            for g in &mut ghosts {
                percepts.push(Percept::new(g.id, g.attributes.clone()));
                g.remaining -= 1;
            }
            ghosts.retain(|g| g.remaining > 0);

            if let Some(normal) = &jitter {
                for p in &mut percepts {
                    p.attributes.position += Vec2::new(normal.sample(&mut rng), normal.sample(&mut rng));
                }
            }
            Frame {
                index: frame.index,
                camera: frame.camera,
                percepts,
                actions: frame.actions.clone(),
            }
        })
        .collect()
}

/// Frames on either side of a ghost's lifetime during which the tracker may
/// still hold a track where the ghost or a missed object was last seen.
fn ghost_memory(noise: &NoiseConfig) -> usize {
    (noise.flicker_burst_length + noise.ghost_frames) as usize * 4
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frames(n: u64, objects: u32) -> Vec<Frame> {
        (0..n)
            .map(|i| Frame {
                index: i,
                percepts: (0..objects)
                    .map(|k| {
                        Percept::new(
                            k,
                            Attributes::new("cube", Vec2::new(20.0 + 40.0 * k as f64, 50.0), Vec2::new(20.0, 20.0)),
                        )
                    })
                    .collect(),
                ..Frame::default()
            })
            .collect()
    }

    const VIEW: Vec2 = Vec2 { x: 360.0, y: 240.0 };

    #[test]
    fn zero_rates_are_identity() {
        let f = frames(20, 3);
        assert_eq!(corrupt(&f, &NoiseConfig::default(), VIEW, 1), f);
    }

    #[test]
    fn full_miss_rate_empties_frames() {
        let noise = NoiseConfig {
            miss_rate: 1.0,
            ..NoiseConfig::default()
        };
        assert!(corrupt(&frames(20, 3), &noise, VIEW, 1).iter().all(|f| f.percepts.is_empty()));
    }

    #[test]
    fn misses_come_in_bursts_of_fixed_length() {
        let noise = NoiseConfig {
            miss_rate: 0.05,
            flicker_burst_length: 3,
            ..NoiseConfig::default()
        };
        let out = corrupt(&frames(400, 4), &noise, VIEW, 9);
        for k in 0..4u32 {
            let present: Vec<bool> = out.iter().map(|f| f.percepts.iter().any(|p| p.id == k)).collect();
            let mut run = 0;
            for &p in present.iter().chain([true].iter()) {
                if p {
                    assert!(run == 0 || run % 3 == 0, "gap of {run} frames");
                    run = 0;
                } else {
                    run += 1;
                }
            }
        }
    }

    #[test]
    fn one_frame_ghosts_every_frame() {
        let noise = NoiseConfig {
            ghost_rate: 1.0,
            ghost_frames: 1,
            ..NoiseConfig::default()
        };
        let out = corrupt(&frames(50, 1), &noise, VIEW, 3);
        for f in &out {
            let ghosts: Vec<&Percept> = f.percepts.iter().filter(|p| p.id >= GHOST_ID_BASE).collect();
            assert_eq!(ghosts.len(), 1);
            assert_ne!(ghosts[0].attributes.object_type, "snitch");
        }
    }

    #[test]
    fn ghosts_keep_their_clearance() {
        let noise = NoiseConfig {
            ghost_rate: 1.0,
            ghost_frames: 2,
            ghost_clearance: 60.0,
            ..NoiseConfig::default()
        };
        let input = frames(80, 2);
        let out = corrupt(&input, &noise, VIEW, 11);
        let mut placed = Vec::new();
        for f in &out {
            for g in f.percepts.iter().filter(|p| p.id >= GHOST_ID_BASE) {
                for real in &input[0].percepts {
                    assert!(g.attributes.position.distance(real.attributes.position) >= 60.0);
                }
                placed.push((g.id, g.attributes.position));
            }
        }
        placed.dedup_by_key(|(id, _)| *id);
        assert!(placed.len() > 10);
    }

    #[test]
    fn deterministic_in_seed() {
        let noise = NoiseConfig {
            miss_rate: 0.1,
            ghost_rate: 0.3,
            jitter_sigma: 1.5,
            flicker_burst_length: 2,
            ghost_frames: 3,
            ..NoiseConfig::default()
        };
        let f = frames(60, 3);
        assert_eq!(corrupt(&f, &noise, VIEW, 5), corrupt(&f, &noise, VIEW, 5));
        assert_ne!(corrupt(&f, &noise, VIEW, 5), corrupt(&f, &noise, VIEW, 6));
    }
}
