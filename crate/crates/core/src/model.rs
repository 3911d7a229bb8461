//! Domain types shared by the engine, and the world-model validator.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{BBox, Vec2};

/// Estimated or perceived attributes of one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attributes {
    #[serde(rename = "type")]
    pub object_type: String,
    /// Bounding-box center in image pixels.
    #[serde(rename = "pos")]
    pub position: Vec2,
    /// Width and height in pixels, both strictly positive.
    pub size: Vec2,
    /// Optional named feature vectors (mean colour and the like). Not used by
    /// the default alignment cost.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, Vec<f64>>,
}

impl Attributes {
    pub fn new(object_type: impl Into<String>, position: Vec2, size: Vec2) -> Self {
        Self {
            object_type: object_type.into(),
            position,
            size,
            extras: BTreeMap::new(),
        }
    }

    pub fn bbox(&self) -> BBox {
        BBox::new(self.position, self.size)
    }
}

/// One detection in one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Percept {
    /// Unique within its frame only.
    pub id: u32,
    pub attributes: Attributes,
    pub score: f64,
}

impl Percept {
    pub fn new(id: u32, attributes: Attributes) -> Self {
        Self {
            id,
            attributes,
            score: 1.0,
        }
    }
}

/// Stable anchor symbol of the form `typeN`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnchorId(String);

impl AnchorId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AnchorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AnchorId {
    fn from(s: &str) -> Self {
        AnchorId(s.to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorStatus {
    Visible,
    Occluded,
    OutOfView,
    Attached,
    Lost,
}

impl AnchorStatus {
    /// Statuses under which an anchored object is kept without decay.
    pub fn is_maintaining(self) -> bool {
        matches!(
            self,
            AnchorStatus::Occluded | AnchorStatus::OutOfView | AnchorStatus::Attached
        )
    }
}

impl fmt::Display for AnchorStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            AnchorStatus::Visible => "visible",
            AnchorStatus::Occluded => "occluded",
            AnchorStatus::OutOfView => "out_of_view",
            AnchorStatus::Attached => "attached",
            AnchorStatus::Lost => "lost",
        };
        f.write_str(s)
    }
}

/// A persistent symbol for one physical object.
#[derive(Debug, Clone, PartialEq)]
pub struct Anchor {
    pub id: AnchorId,
    pub attributes: Attributes,
    pub confidence: f64,
    pub status: AnchorStatus,
    pub last_seen_frame: u64,
    pub parent: Option<AnchorId>,
    /// Child position minus parent position, frozen when the attachment is made.
    pub parent_offset: Option<Vec2>,
}

impl Anchor {
    pub fn new(id: AnchorId, attributes: Attributes, confidence: f64, frame: u64) -> Self {
        Self {
            id,
            attributes,
            confidence,
            status: AnchorStatus::Visible,
            last_seen_frame: frame,
            parent: None,
            parent_offset: None,
        }
    }

    pub fn bbox(&self) -> BBox {
        self.attributes.bbox()
    }

    pub fn is_attached(&self) -> bool {
        self.parent.is_some()
    }

    pub(crate) fn clear_parent(&mut self) {
        self.parent = None;
        self.parent_offset = None;
    }
}

/// A provisional track that has not yet reached the anchoring threshold.
/// Candidates carry no `typeN` symbol, so ghosts never consume instance numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub key: u64,
    pub attributes: Attributes,
    pub confidence: f64,
    pub last_seen_frame: u64,
}

/// The maintained symbol system at one point in time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WorldModel {
    /// Index of the last processed frame; `None` before the first cycle.
    pub frame_index: Option<u64>,
    pub anchors: Vec<Anchor>,
    pub candidates: Vec<Candidate>,
    /// Viewport translation in the world frame.
    pub camera_pose: Vec2,
    /// Next instance number per object type. Never decreases, so pruned ids
    /// are not reused.
    pub next_instance: BTreeMap<String, u32>,
    pub(crate) next_candidate: u64,
}

impl WorldModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn anchor(&self, id: &AnchorId) -> Option<&Anchor> {
        self.anchors.iter().find(|a| &a.id == id)
    }

    pub fn anchor_mut(&mut self, id: &AnchorId) -> Option<&mut Anchor> {
        self.anchors.iter_mut().find(|a| &a.id == id)
    }

    /// Allocates the next `typeN` symbol for `object_type`.
    pub fn allocate_id(&mut self, object_type: &str) -> AnchorId {
        let n = self.next_instance.entry(object_type.to_owned()).or_insert(0);
        let id = AnchorId(format!("{object_type}{n}"));
        *n += 1;
        id
    }

    pub(crate) fn allocate_candidate_key(&mut self) -> u64 {
        let k = self.next_candidate;
        self.next_candidate += 1;
        k
    }

    /// Number of parent hops from `id` to its root. `None` if the chain does
    /// not terminate within `anchors.len()` steps or a parent is missing.
    pub fn depth(&self, id: &AnchorId) -> Option<usize> {
        let mut current = self.anchor(id)?;
        let mut depth = 0;
        while let Some(parent) = &current.parent {
            depth += 1;
            if depth > self.anchors.len() {
                return None;
            }
            current = self.anchor(parent)?;
        }
        Some(depth)
    }

    /// True if `ancestor` is reachable from `id` by following parent edges
    /// (or equals it).
    pub fn is_ancestor_or_self(&self, ancestor: &AnchorId, id: &AnchorId) -> bool {
        let mut current = Some(id.clone());
        let mut steps = 0;
        while let Some(c) = current {
            if &c == ancestor {
                return true;
            }
            steps += 1;
            if steps > self.anchors.len() + 1 {
                return false;
            }
            current = self.anchor(&c).and_then(|a| a.parent.clone());
        }
        false
    }
}

/// A named agent action with ordered arguments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionEvent {
    pub name: String,
    /// Anchor ids, or located references `type@x,y` resolved against the
    /// current estimates.
    pub args: Vec<String>,
    #[serde(default)]
    pub frame_index: u64,
}

impl ActionEvent {
    pub fn new<S: Into<String>>(name: &str, args: impl IntoIterator<Item = S>, frame: u64) -> Self {
        Self {
            name: name.to_owned(),
            args: args.into_iter().map(Into::into).collect(),
            frame_index: frame,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ViolationKind {
    DuplicateId,
    Cycle,
    UnknownParent(AnchorId),
    /// `parent`, `parent_offset` and `status = attached` disagree.
    AttachmentMismatch,
    ConfidenceOutOfRange(f64),
    NonPositiveSize,
    NonFinitePosition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub anchor_id: AnchorId,
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let id = &self.anchor_id;
        match &self.kind {
            ViolationKind::DuplicateId => write!(f, "{id}: duplicate id"),
            ViolationKind::Cycle => write!(f, "{id}: cycle in attachment graph"),
            ViolationKind::UnknownParent(p) => write!(f, "{id}: unknown parent {p}"),
            ViolationKind::AttachmentMismatch => {
                write!(f, "{id}: parent, parent_offset and attached status disagree")
            }
            ViolationKind::ConfidenceOutOfRange(c) => {
                write!(f, "{id}: confidence {c} outside [0, 1]")
            }
            ViolationKind::NonPositiveSize => write!(f, "{id}: size must be positive"),
            ViolationKind::NonFinitePosition => write!(f, "{id}: position is not finite"),
        }
    }
}

/// Checks every world-model invariant; an empty result means the model is valid.
pub fn validate_world_model(model: &WorldModel) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |anchor_id: &AnchorId, kind| {
        out.push(Violation {
            anchor_id: anchor_id.clone(),
            kind,
        })
    };

    let mut seen: HashMap<&AnchorId, usize> = HashMap::new();
    for a in &model.anchors {
        let count = seen.entry(&a.id).or_insert(0);
        *count += 1;
        if *count == 2 {
            push(&a.id, ViolationKind::DuplicateId);
        }
    }

    for a in &model.anchors {
        if !(0.0..=1.0).contains(&a.confidence) {
            push(&a.id, ViolationKind::ConfidenceOutOfRange(a.confidence));
        }
        let size = a.attributes.size;
        if !(size.x > 0.0 && size.y > 0.0) {
            push(&a.id, ViolationKind::NonPositiveSize);
        }
        if !a.attributes.position.is_finite() {
            push(&a.id, ViolationKind::NonFinitePosition);
        }
        let attached = a.status == AnchorStatus::Attached;
        if a.parent.is_some() != attached || a.parent_offset.is_some() != attached {
            push(&a.id, ViolationKind::AttachmentMismatch);
        }
        if let Some(p) = &a.parent {
            if !seen.contains_key(p) {
                push(&a.id, ViolationKind::UnknownParent(p.clone()));
            }
        }
    }

    // Cycle detection: walk parent chains, colouring nodes. Each cycle is
    // reported once, under its smallest member.
    let parent_of: HashMap<&AnchorId, &AnchorId> = model
        .anchors
        .iter()
        .filter_map(|a| a.parent.as_ref().map(|p| (&a.id, p)))
        .collect();
    let mut done: BTreeSet<&AnchorId> = BTreeSet::new();
    let mut ids: Vec<&AnchorId> = model.anchors.iter().map(|a| &a.id).collect();
    ids.sort();
    ids.dedup();
    for start in ids {
        if done.contains(start) {
            continue;
        }
        let mut path: Vec<&AnchorId> = Vec::new();
        let mut on_path: BTreeSet<&AnchorId> = BTreeSet::new();
        let mut current = Some(start);
        while let Some(c) = current {
            if done.contains(c) {
                break;
            }
            if on_path.contains(c) {
                let pos = path.iter().position(|p| *p == c).unwrap_or(0);
                if let Some(min) = path[pos..].iter().min() {
                    push(min, ViolationKind::Cycle);
                }
                break;
            }
            on_path.insert(c);
            path.push(c);
            current = parent_of.get(c).copied();
        }
        done.extend(path);
    }

    out
}
