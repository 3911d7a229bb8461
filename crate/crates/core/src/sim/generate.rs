use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::eval::Subtask;
use crate::geometry::{BBox, Vec2};
use crate::hypothesis::located_ref;
use crate::model::{ActionEvent, Attributes, Percept};
use crate::tracker::Frame;

use super::labels::is_detectable;
use super::noise::corrupt;
use super::{
    EventPlan, RandomAction, ScenarioConfig, ScenarioRecord, ScriptEvent, SimError, TruthFrame, TruthObject, TARGET_ID,
    TARGET_TYPE,
};

/// A container must exceed its content by this much in both dimensions.
pub(super) const CONTAIN_MARGIN: f64 = 8.0;
const PLACEMENT_MARGIN: f64 = 10.0;
const PLACEMENT_GAP: f64 = 4.0;
const MOTION_EPS: f64 = 1e-6;

/// Size ladder: instances of one type differ by 8 px, and any two types
/// differ by at least 2 px in both dimensions.
pub fn object_size(object_type: &str, instance: u32) -> Vec2 {
    let k = 8.0 * instance as f64;
    match object_type {
        "snitch" => Vec2::new(12.0, 12.0),
        "sphere" => Vec2::new(16.0 + k, 16.0 + k),
        "cube" => Vec2::new(20.0 + k, 20.0 + k),
        "cylinder" => Vec2::new(22.0 + k, 26.0 + k),
        "cone" => Vec2::new(30.0 + k, 30.0 + k),
        _ => Vec2::new(20.0 + k, 20.0 + k),
    }
}

#[derive(Debug, Clone)]
struct Obj {
    id: String,
    object_type: &'static str,
    size: Vec2,
    pos: Vec2,
    z: u32,
    parent: Option<usize>,
    offset: Vec2,
    child: Option<usize>,
    busy_until: Option<u64>,
}

#[derive(Debug, Clone)]
struct Motion {
    obj: usize,
    from: Vec2,
    to: Vec2,
    start: u64,
    end: u64,
}

impl Motion {
    fn moves(&self) -> bool {
        self.from.distance(self.to) > MOTION_EPS * (self.end - self.start) as f64
    }

    fn position(&self, t: u64) -> Vec2 {
        if t >= self.end {
            return self.to;
        }
        let s = (t - self.start) as f64 / (self.end - self.start) as f64;
        self.from.lerp(self.to, s)
    }
}

fn duration(from: Vec2, to: Vec2, speed: f64) -> u64 {
    ((from.distance(to) / speed).ceil() as u64).max(1)
}

fn place_objects(config: &ScenarioConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Obj>, SimError> {
    let ids = config.objects.ids();
    let mut per_type = std::collections::BTreeMap::<&str, u32>::new();
    let mut objs: Vec<Obj> = Vec::with_capacity(ids.len());
    for (index, (id, t)) in ids.into_iter().enumerate() {
        let k = per_type.entry(t).or_insert(0);
        let size = object_size(t, *k);
        *k += 1;
        objs.push(Obj {
            id,
            object_type: t,
            size,
            pos: Vec2::ZERO,
            z: index as u32,
            parent: None,
            offset: Vec2::ZERO,
            child: None,
            busy_until: None,
        });
    }
    let origin = config.camera_pose(0);
    let mut placed: Vec<BBox> = Vec::new();
    for o in objs.iter_mut().filter(|o| config.layout.contains_key(&o.id)) {
        o.pos = config.layout[&o.id];
        placed.push(BBox::new(o.pos, o.size));
    }
    for o in objs.iter_mut().filter(|o| !config.layout.contains_key(&o.id)) {
        let half = o.size * 0.5 + Vec2::new(PLACEMENT_MARGIN, PLACEMENT_MARGIN);
        let hi = config.viewport - half;
        if hi.x <= half.x || hi.y <= half.y {
            return Err(SimError::Placement(o.id.clone()));
        }
        let grown = o.size + Vec2::new(2.0 * PLACEMENT_GAP, 2.0 * PLACEMENT_GAP);
        let spot = (0..500).find_map(|_| {
            let p = origin + Vec2::new(rng.random_range(half.x..hi.x), rng.random_range(half.y..hi.y));
            let b = BBox::new(p, grown);
            (!placed.iter().any(|q| b.overlaps(q))).then_some(p)
        });
        let Some(p) = spot else {
            return Err(SimError::Placement(o.id.clone()));
        };
        o.pos = p;
        placed.push(BBox::new(p, o.size));
    }
    Ok(objs)
}

fn lookup(objs: &[Obj], name: &str) -> Option<usize> {
    let name = if name == TARGET_TYPE { TARGET_ID } else { name };
    objs.iter().position(|o| o.id == name)
}

/// Random sequential script over the requested action kinds.
fn random_script(
    config: &ScenarioConfig,
    objs: &[Obj],
    count: usize,
    actions: &[RandomAction],
    rng: &mut ChaCha8Rng,
) -> Vec<ScriptEvent> {
    let mut pos: Vec<Vec2> = objs.iter().map(|o| o.pos).collect();
    let mut parent: Vec<Option<usize>> = vec![None; objs.len()];
    let mut child: Vec<Option<usize>> = vec![None; objs.len()];
    let mut events = Vec::new();
    let mut t = rng.random_range(5..15u64);
    if actions.is_empty() {
        return events;
    }
    let free = |parent: &[Option<usize>]| -> Vec<usize> { (0..objs.len()).filter(|&i| parent[i].is_none()).collect() };

    for _ in 0..count {
        let origin = config.camera_pose(t);
        let speed = rng.random_range(config.min_speed..=config.max_speed);
        let dest = |rng: &mut ChaCha8Rng, size: Vec2| {
            let half = size * 0.5 + Vec2::new(PLACEMENT_MARGIN, PLACEMENT_MARGIN);
            origin
                + Vec2::new(
                    rng.random_range(half.x..config.viewport.x - half.x),
                    rng.random_range(half.y..config.viewport.y - half.y),
                )
        };
        let mut kind = actions[rng.random_range(0..actions.len())];
        let candidates = free(&parent);
        if kind == RandomAction::Contain {
            let cones: Vec<usize> = candidates
                .iter()
                .copied()
                .filter(|&i| objs[i].object_type == "cone" && child[i].is_none())
                .collect();
            let pick = if cones.is_empty() {
                None
            } else {
                let c = cones[rng.random_range(0..cones.len())];
                let targets: Vec<usize> = candidates
                    .iter()
                    .copied()
                    .filter(|&i| {
                        i != c
                            && objs[c].size.x >= objs[i].size.x + CONTAIN_MARGIN
                            && objs[c].size.y >= objs[i].size.y + CONTAIN_MARGIN
                    })
                    .collect();
                (!targets.is_empty()).then(|| (c, targets[rng.random_range(0..targets.len())]))
            };
            match pick {
                Some((c, target)) => {
                    let end = t + duration(pos[c], pos[target], speed);
                    if end + 2 >= config.frames {
                        break;
                    }
                    events.push(ScriptEvent::Contain {
                        cone: objs[c].id.clone(),
                        target: objs[target].id.clone(),
                        start: t,
                        end: Some(end),
                    });
                    pos[c] = pos[target];
                    parent[target] = Some(c);
                    child[c] = Some(target);
                    t = end + 1 + rng.random_range(2..8u64);
                    continue;
                }
                None => kind = RandomAction::Slide,
            }
        }
        let o = candidates[rng.random_range(0..candidates.len())];
        let end = match kind {
            RandomAction::Rotate => {
                let end = t + rng.random_range(5..15u64);
                if end + 1 >= config.frames {
                    break;
                }
                events.push(ScriptEvent::Rotate {
                    object: objs[o].id.clone(),
                    start: t,
                    end,
                });
                end
            }
            _ => {
                let to = dest(rng, objs[o].size);
                let end = t + duration(pos[o], to, speed);
                if end + 1 >= config.frames {
                    break;
                }
                let object = objs[o].id.clone();
                events.push(if kind == RandomAction::PickPlace {
                    ScriptEvent::PickPlace {
                        object,
                        start: t,
                        end: Some(end),
                        to,
                    }
                } else {
                    ScriptEvent::Slide {
                        object,
                        start: t,
                        end: Some(end),
                        to,
                    }
                });
                let shift = to - pos[o];
                let mut cur = Some(o);
                while let Some(i) = cur {
                    pos[i] += shift;
                    cur = child[i];
                }
                end
            }
        };
        t = end + rng.random_range(2..8u64);
    }
    events
}

struct Sim<'a> {
    config: &'a ScenarioConfig,
    objs: Vec<Obj>,
    motions: Vec<Motion>,
    next_z: u32,
}

impl Sim<'_> {
    fn image_ref(&self, i: usize, frame: u64) -> String {
        let o = &self.objs[i];
        located_ref(o.object_type, o.pos - self.config.camera_pose(frame), Some(o.size))
    }

    fn raise(&mut self, i: usize) {
        self.objs[i].z = self.next_z;
        self.next_z += 1;
    }

    fn check_free(&self, index: usize, i: usize, t: u64) -> Result<(), SimError> {
        let o = &self.objs[i];
        if o.parent.is_some() {
            return Err(infeasible(index, format!("{} is inside a container", o.id)));
        }
        if o.busy_until.is_some_and(|b| b >= t) {
            return Err(infeasible(index, format!("{} is busy with another event", o.id)));
        }
        Ok(())
    }

    fn resolve(&self, index: usize, name: &str) -> Result<usize, SimError> {
        lookup(&self.objs, name).ok_or_else(|| infeasible(index, format!("unknown object {name}")))
    }

    fn motion_end(&self, index: usize, from: Vec2, to: Vec2, start: u64, end: Option<u64>) -> Result<u64, SimError> {
        let end = end.unwrap_or_else(|| start + duration(from, to, self.config.max_speed));
        if end <= start {
            return Err(infeasible(index, "motion must end after it starts".into()));
        }
        if end >= self.config.frames {
            return Err(infeasible(index, format!("ends at frame {end}, past the scenario")));
        }
        Ok(end)
    }

    /// Starts one event at frame `t`, returning any action it emits now.
    fn start_event(&mut self, index: usize, event: &ScriptEvent, t: u64) -> Result<Option<ActionEvent>, SimError> {
        match event {
            ScriptEvent::Slide { object, end, to, .. } | ScriptEvent::PickPlace { object, end, to, .. } => {
                let i = self.resolve(index, object)?;
                self.check_free(index, i, t)?;
                let end = self.motion_end(index, self.objs[i].pos, *to, t, *end)?;
                self.begin_motion(i, *to, t, end);
                let name = if matches!(event, ScriptEvent::Slide { .. }) {
                    "slide"
                } else {
                    "pick_place"
                };
                Ok(Some(ActionEvent::new(name, [self.image_ref(i, t)], t)))
            }
            ScriptEvent::Rotate { object, end, .. } => {
                let i = self.resolve(index, object)?;
                self.check_free(index, i, t)?;
                if *end < t || *end >= self.config.frames {
                    return Err(infeasible(index, "rotation interval outside the scenario".into()));
                }
                self.objs[i].busy_until = Some(*end);
                self.raise(i);
                Ok(Some(ActionEvent::new("rotate", [self.image_ref(i, t)], t)))
            }
            ScriptEvent::Contain { cone, target, end, .. } => {
                let c = self.resolve(index, cone)?;
                let g = self.resolve(index, target)?;
                if self.objs[c].object_type != "cone" {
                    return Err(infeasible(index, format!("{cone} is not a cone")));
                }
                if c == g {
                    return Err(infeasible(index, "a cone cannot contain itself".into()));
                }
                self.check_free(index, c, t)?;
                self.check_free(index, g, t)?;
                if self.objs[c].child.is_some() {
                    return Err(infeasible(index, format!("{cone} already holds an object")));
                }
                let (cs, gs) = (self.objs[c].size, self.objs[g].size);
                if cs.x < gs.x + CONTAIN_MARGIN || cs.y < gs.y + CONTAIN_MARGIN {
                    return Err(infeasible(index, format!("{cone} is too small to cover {target}")));
                }
                let to = self.objs[g].pos;
                let end = self.motion_end(index, self.objs[c].pos, to, t, *end)?;
                if end + 1 >= self.config.frames {
                    return Err(infeasible(index, "containment would start after the last frame".into()));
                }
                self.begin_motion(c, to, t, end);
                self.objs[c].busy_until = Some(end + 1);
                self.objs[g].busy_until = Some(end + 1);
                Ok(None)
            }
            ScriptEvent::Uncover { cone, end, to, .. } => {
                let c = self.resolve(index, cone)?;
                self.check_free(index, c, t)?;
                let Some(g) = self.objs[c].child else {
                    return Err(infeasible(index, format!("{cone} holds nothing")));
                };
                let end = self.motion_end(index, self.objs[c].pos, *to, t, *end)?;
                let action = ActionEvent::new("uncover", [self.image_ref(c, t), self.image_ref(g, t)], t);
                self.objs[c].child = None;
                self.objs[g].parent = None;
                self.objs[g].busy_until = Some(end);
                self.begin_motion(c, *to, t, end);
                Ok(Some(action))
            }
        }
    }

    fn begin_motion(&mut self, i: usize, to: Vec2, start: u64, end: u64) {
        self.raise(i);
        self.objs[i].busy_until = Some(end);
        self.motions.push(Motion {
            obj: i,
            from: self.objs[i].pos,
            to,
            start,
            end,
        });
    }

    fn propagate(&mut self) {
        let mut order: Vec<(usize, usize)> = (0..self.objs.len())
            .filter(|&i| self.objs[i].parent.is_some())
            .map(|i| (self.depth(i), i))
            .collect();
        order.sort_unstable();
        for (_, i) in order {
            let p = self.objs[i].parent.expect("filtered");
            self.objs[i].pos = self.objs[p].pos + self.objs[i].offset;
        }
    }

    fn depth(&self, mut i: usize) -> usize {
        let mut d = 0;
        while let Some(p) = self.objs[i].parent {
            d += 1;
            i = p;
        }
        d
    }

    fn is_moving(&self, i: usize, t: u64) -> bool {
        self.motions
            .iter()
            .any(|m| m.obj == i && m.start <= t && t <= m.end && m.moves())
    }

    /// Label from the event state: containment chain and active motions.
    fn label(&self, target: usize, t: u64, scene: &[TruthObject]) -> Subtask {
        if self.objs[target].parent.is_none() {
            let o = &scene[target];
            return if is_detectable(o, scene, self.config.viewport, self.config.occlusion_threshold) {
                Subtask::Visible
            } else {
                Subtask::Occluded
            };
        }
        let mut cur = self.objs[target].parent;
        while let Some(p) = cur {
            if self.is_moving(p, t) {
                return Subtask::Carried;
            }
            cur = self.objs[p].parent;
        }
        Subtask::Contained
    }

    fn snapshot(&self, t: u64) -> Vec<TruthObject> {
        let cam = self.config.camera_pose(t);
        self.objs
            .iter()
            .map(|o| TruthObject {
                id: o.id.clone(),
                object_type: o.object_type.to_owned(),
                pos: o.pos - cam,
                size: o.size,
                z: o.z,
                parent: o.parent.map(|p| self.objs[p].id.clone()),
            })
            .collect()
    }
}

fn infeasible(index: usize, reason: String) -> SimError {
    SimError::InfeasibleEvent { index, reason }
}

/// Runs a scenario. Deterministic in the config (including its seed).
pub fn generate(config: &ScenarioConfig) -> Result<ScenarioRecord, SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let objs = place_objects(config, &mut rng)?;
    let script = match &config.events {
        EventPlan::Script { events } => events.clone(),
        EventPlan::Random { count, actions } => random_script(config, &objs, *count, actions, &mut rng),
    };
    let mut order: Vec<usize> = (0..script.len()).collect();
    order.sort_by_key(|&i| script[i].start());
    if let Some(&i) = order.iter().find(|&&i| script[i].start() >= config.frames) {
        return Err(infeasible(i, "starts after the last frame".into()));
    }

    let target = lookup(&objs, TARGET_ID).expect("validated: one snitch");
    let next_z = objs.len() as u32;
    let mut sim = Sim {
        config,
        objs,
        motions: Vec::new(),
        next_z,
    };
    // (cone, content, frame at which the containment holds)
    let mut pending: Vec<(usize, usize, u64)> = Vec::new();
    let mut cursor = 0;
    let mut truth = Vec::with_capacity(config.frames as usize);
    let mut clean = Vec::with_capacity(config.frames as usize);
    let mut events = Vec::new();

    for t in 0..config.frames {
        let mut actions = Vec::new();
        for (c, g, _) in pending.iter().filter(|p| p.2 == t) {
            let (c, g) = (*c, *g);
            sim.objs[g].parent = Some(c);
            sim.objs[g].offset = sim.objs[g].pos - sim.objs[c].pos;
            sim.objs[c].child = Some(g);
            actions.push(ActionEvent::new("contain", [sim.image_ref(c, t), sim.image_ref(g, t)], t));
        }
        pending.retain(|p| p.2 != t);

        while cursor < order.len() && script[order[cursor]].start() == t {
            let index = order[cursor];
            let event = &script[index];
            if let Some(a) = sim.start_event(index, event, t)? {
                actions.push(a);
            }
            if let ScriptEvent::Contain { cone, target, .. } = event {
                let c = lookup(&sim.objs, cone).expect("checked");
                let g = lookup(&sim.objs, target).expect("checked");
                let end = sim.motions.last().expect("contain starts a motion").end;
                pending.push((c, g, end + 1));
            }
            cursor += 1;
        }

        for m in &sim.motions {
            sim.objs[m.obj].pos = m.position(t);
        }
        sim.propagate();

        let scene = sim.snapshot(t);
        let label = sim.label(target, t, &scene);
        let percepts = scene
            .iter()
            .enumerate()
            .filter(|(_, o)| is_detectable(o, &scene, config.viewport, config.occlusion_threshold))
            .map(|(i, o)| Percept::new(i as u32, Attributes::new(o.object_type.clone(), o.pos, o.size)))
            .collect();
        sim.motions.retain(|m| m.end > t);

        events.extend(actions.iter().cloned());
        clean.push(Frame {
            index: t,
            camera: config.camera_pose(t),
            percepts,
            actions,
        });
        truth.push(TruthFrame {
            frame: t,
            camera: config.camera_pose(t),
            label,
            target_detected: false,
            objects: scene,
        });
    }

    let detections = if config.noise.is_noiseless() {
        clean
    } else {
        corrupt(&clean, &config.noise, config.viewport, config.seed)
    };
    for (tf, f) in truth.iter_mut().zip(&detections) {
        tf.target_detected = f.percepts.iter().any(|p| p.attributes.object_type == TARGET_TYPE);
    }
    Ok(ScenarioRecord {
        config: config.clone(),
        script,
        truth,
        events,
        detections,
    })
}
