use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Vec2;

use super::{CameraKey, EventPlan, NoiseConfig, ObjectCounts, RandomAction, ScenarioConfig, ScriptEvent};

pub const PRESETS: [&str; 6] = ["mixed", "carried_distractor", "camera_pan", "ghosts", "visible_only", "random"];

const PRESET_STREAM: u64 = 0x7072_6573_6574;

/// Named scenario families, each parameterised by `seed`.
///
/// * `mixed`: occlusion, containment, carrying with a three-deep
///   cone-on-cone-on-snitch chain, two uncovers and a final snitch slide.
/// * `carried_distractor`: a cone swallows the snitch next to a distractor
///   and carries it away.
/// * `camera_pan`: eight static objects under a moving camera.
/// * `ghosts`: static objects, in-place rotations, ghost and miss noise.
/// * `visible_only`: the snitch stays in plain view.
/// * `random`: a random event mix.
pub fn preset(name: &str, seed: u64) -> Option<ScenarioConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ PRESET_STREAM);
    let base = ScenarioConfig {
        seed,
        ..ScenarioConfig::default()
    };
    Some(match name {
        "mixed" => mixed(base, &mut rng),
        "carried_distractor" => carried_distractor(base, &mut rng),
        "camera_pan" => camera_pan(base, &mut rng),
        "ghosts" => ScenarioConfig {
            objects: ObjectCounts {
                cone: 2,
                cube: 2,
                sphere: 1,
                cylinder: 1,
                snitch: 1,
            },
            events: EventPlan::Random {
                count: 10,
                actions: vec![RandomAction::Rotate],
            },
            noise: NoiseConfig {
                miss_rate: 0.01,
                ghost_rate: 0.5,
                flicker_burst_length: 3,
                ghost_frames: 3,
                // beyond the reach of the default alignment threshold
                ghost_clearance: 90.0,
                ..NoiseConfig::default()
            },
            ..base
        },
        "visible_only" => visible_only(base, &mut rng),
        "random" => ScenarioConfig {
            events: EventPlan::Random {
                count: 12,
                actions: vec![
                    RandomAction::Slide,
                    RandomAction::Rotate,
                    RandomAction::PickPlace,
                    RandomAction::Contain,
                ],
            },
            ..base
        },
        _ => return None,
    })
}

/// Writes a sequential script, timing motions from the tracked positions.
struct Story<'a> {
    rng: &'a mut ChaCha8Rng,
    t: u64,
    pos: BTreeMap<String, Vec2>,
    events: Vec<ScriptEvent>,
    min_speed: f64,
    max_speed: f64,
}

impl<'a> Story<'a> {
    fn new(rng: &'a mut ChaCha8Rng, layout: &BTreeMap<String, Vec2>, config: &ScenarioConfig, start: u64) -> Self {
        Self {
            rng,
            t: start,
            pos: layout.clone(),
            events: Vec::new(),
            min_speed: config.min_speed,
            max_speed: config.max_speed,
        }
    }

    fn span(&mut self, from: Vec2, to: Vec2) -> (u64, u64) {
        let speed = self.rng.random_range(self.min_speed..=self.max_speed);
        let start = self.t;
        let end = start + ((from.distance(to) / speed).ceil() as u64).max(1);
        (start, end)
    }

    fn pause(&mut self, lo: u64, hi: u64) {
        self.t += self.rng.random_range(lo..=hi);
    }

    fn moved(&mut self, objects: &[&str], to: Vec2, end: u64) {
        for o in objects {
            self.pos.insert((*o).to_owned(), to);
        }
        self.t = end + 1;
    }

    /// Moves `object` together with everything stacked in it.
    fn slide(&mut self, object: &str, load: &[&str], to: Vec2) {
        let (start, end) = self.span(self.pos[object], to);
        self.events.push(ScriptEvent::Slide {
            object: object.to_owned(),
            start,
            end: Some(end),
            to,
        });
        let all: Vec<&str> = std::iter::once(object).chain(load.iter().copied()).collect();
        self.moved(&all, to, end);
    }

    fn pick_place(&mut self, object: &str, to: Vec2) {
        let (start, end) = self.span(self.pos[object], to);
        self.events.push(ScriptEvent::PickPlace {
            object: object.to_owned(),
            start,
            end: Some(end),
            to,
        });
        self.moved(&[object], to, end);
    }

    fn rotate(&mut self, object: &str) {
        let start = self.t;
        let end = start + self.rng.random_range(5..=10);
        self.events.push(ScriptEvent::Rotate {
            object: object.to_owned(),
            start,
            end,
        });
        self.t = end + 1;
    }

    fn contain(&mut self, cone: &str, target: &str) {
        let to = self.pos[target];
        let (start, end) = self.span(self.pos[cone], to);
        self.events.push(ScriptEvent::Contain {
            cone: cone.to_owned(),
            target: target.to_owned(),
            start,
            end: Some(end),
        });
        self.moved(&[cone], to, end);
        // the containment itself takes effect one frame later
        self.t += 1;
    }

    fn uncover(&mut self, cone: &str, to: Vec2) {
        let (start, end) = self.span(self.pos[cone], to);
        self.events.push(ScriptEvent::Uncover {
            cone: cone.to_owned(),
            start,
            end: Some(end),
            to,
        });
        self.moved(&[cone], to, end);
    }
}

fn jitter(rng: &mut ChaCha8Rng, r: f64) -> Vec2 {
    Vec2::new(rng.random_range(-r..=r), rng.random_range(-r..=r))
}

fn mixed(base: ScenarioConfig, rng: &mut ChaCha8Rng) -> ScenarioConfig {
    let s = Vec2::new(180.0 + rng.random_range(-20.0..=20.0), 120.0 + rng.random_range(-15.0..=15.0));
    let m = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let at = |dx: f64, dy: f64| s + Vec2::new(dx * m, dy);

    let layout: BTreeMap<String, Vec2> = [
        ("snitch0", at(0.0, 0.0)),
        ("cylinder0", at(-70.0, 0.0)),
        ("cone0", at(0.0, -70.0)),
        ("cone1", at(-120.0, -70.0)),
        ("cone2", at(120.0, -75.0)),
        ("cube0", at(60.0, -70.0)),
        ("sphere0", at(-130.0, 70.0)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_owned(), v))
    .collect();

    let start = rng.random_range(4..=12);
    let mut story = Story::new(rng, &layout, &base, start);
    story.slide("cylinder0", &[], at(70.0, 0.0));
    story.pause(2, 6);
    story.pick_place("cube0", at(125.0, -15.0));
    story.pause(2, 6);
    story.contain("cone0", "snitch0");
    story.pause(6, 12);
    story.rotate("sphere0");
    story.pause(2, 6);
    story.slide("cone0", &["snitch0"], at(-60.0, 40.0));
    story.pause(2, 6);
    story.contain("cone1", "cone0");
    story.pause(6, 12);
    story.slide("cone1", &["cone0", "snitch0"], at(40.0, 60.0));
    story.pause(2, 6);
    story.uncover("cone1", at(115.0, 60.0));
    story.pause(2, 6);
    story.uncover("cone0", at(-35.0, 60.0));
    story.pause(2, 6);
    story.slide("snitch0", &[], at(40.0, 15.0));

    ScenarioConfig {
        objects: ObjectCounts {
            cone: 3,
            cube: 1,
            sphere: 1,
            cylinder: 1,
            snitch: 1,
        },
        events: EventPlan::Script { events: story.events },
        layout,
        ..base
    }
}

fn carried_distractor(base: ScenarioConfig, rng: &mut ChaCha8Rng) -> ScenarioConfig {
    let s = Vec2::new(180.0 + rng.random_range(-25.0..=25.0), 120.0 + rng.random_range(-15.0..=15.0));
    let m = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
    let at = |dx: f64, dy: f64| s + Vec2::new(dx * m, dy);

    let layout: BTreeMap<String, Vec2> = [
        ("snitch0", at(0.0, 0.0)),
        // the distractor sits just clear of the cone that will cover the snitch
        ("cube0", at(26.0, 0.0)),
        ("cone0", at(-85.0, 0.0) + jitter(rng, 6.0)),
        ("cone1", at(95.0, -75.0) + jitter(rng, 5.0)),
        ("sphere0", at(100.0, 75.0) + jitter(rng, 5.0)),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_owned(), v))
    .collect();

    let start = rng.random_range(8..=20);
    let mut story = Story::new(rng, &layout, &base, start);
    story.contain("cone0", "snitch0");
    story.pause(4, 10);
    let first = at(-100.0, -60.0) + jitter(story.rng, 8.0);
    story.slide("cone0", &["snitch0"], first);
    story.pause(4, 12);
    let second = at(-110.0, 55.0) + jitter(story.rng, 8.0);
    story.slide("cone0", &["snitch0"], second);
    story.pause(4, 12);
    let third = at(-20.0, 75.0) + jitter(story.rng, 6.0);
    story.slide("cone0", &["snitch0"], third);
    story.pause(4, 12);
    let fourth = at(-115.0, -65.0) + jitter(story.rng, 6.0);
    story.slide("cone0", &["snitch0"], fourth);
    story.pause(4, 10);
    story.uncover("cone0", fourth + Vec2::new(0.0, 55.0));

    ScenarioConfig {
        objects: ObjectCounts {
            cone: 2,
            cube: 1,
            sphere: 1,
            cylinder: 0,
            snitch: 1,
        },
        events: EventPlan::Script { events: story.events },
        layout,
        ..base
    }
}

fn camera_pan(base: ScenarioConfig, rng: &mut ChaCha8Rng) -> ScenarioConfig {
    let objects = ObjectCounts {
        cone: 2,
        cube: 2,
        sphere: 2,
        cylinder: 1,
        snitch: 1,
    };
    // one object per cell of a 4 x 2 grid over the panned region
    let region = Vec2::new(500.0, 320.0);
    let cell = Vec2::new(region.x / 4.0, region.y / 2.0);
    let mut cells: Vec<usize> = (0..8).collect();
    for i in (1..cells.len()).rev() {
        cells.swap(i, rng.random_range(0..=i));
    }
    let layout: BTreeMap<String, Vec2> = objects
        .ids()
        .into_iter()
        .zip(cells)
        .map(|((id, _), c)| {
            let corner = Vec2::new((c % 4) as f64 * cell.x, (c / 4) as f64 * cell.y);
            (id, corner + cell * 0.5 + jitter(rng, 25.0))
        })
        .collect();
    let key = |frame: u64, x: f64, y: f64, rng: &mut ChaCha8Rng| CameraKey {
        frame,
        pose: Vec2::new(x, y) + jitter(rng, 10.0),
    };
    let camera = vec![
        CameraKey {
            frame: 0,
            pose: Vec2::new(30.0, 20.0),
        },
        key(70, 140.0, 10.0, rng),
        key(140, 130.0, 75.0, rng),
        key(210, 10.0, 70.0, rng),
        key(299, 70.0, 40.0, rng),
    ];
    ScenarioConfig {
        objects,
        camera,
        layout,
        ..base
    }
}

fn visible_only(base: ScenarioConfig, rng: &mut ChaCha8Rng) -> ScenarioConfig {
    let to = Vec2::new(rng.random_range(40.0..320.0), rng.random_range(40.0..200.0));
    let first = rng.random_range(5..=20);
    let events = vec![
        ScriptEvent::Rotate {
            object: "cube0".into(),
            start: first,
            end: first + 8,
        },
        ScriptEvent::Rotate {
            object: "cone0".into(),
            start: first + 12,
            end: first + 20,
        },
        ScriptEvent::Slide {
            object: "snitch0".into(),
            start: first + 30,
            end: None,
            to,
        },
    ];
    ScenarioConfig {
        events: EventPlan::Script { events },
        ..base
    }
}
