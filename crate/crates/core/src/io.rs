//! Line-delimited JSON wire formats and scenario directories.
//!
//! * frame record: `{frame, camera: [x,y], detections: [{id, type, score, pos, size}], actions: [{name, args}]}`
//! * world record: `{frame, anchors: [{id, type, pos, size, conf, status, parent?}]}`
//! * prediction record: `{frame, box: {pos, size} | null}`
//! * truth record: `{frame, camera, label, target_detected, objects: [{id, type, pos, size, z, parent?}]}`

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, EngineConfig};
use crate::geometry::{BBox, Vec2};
use crate::model::{ActionEvent, Anchor, AnchorStatus, Attributes, Percept, WorldModel};
use crate::sim::{ScenarioConfig, ScenarioRecord, ScriptEvent, SimError, TruthFrame};
use crate::tracker::Frame;

/// Environment variable naming the default engine config file.
pub const CONFIG_ENV: &str = "AAPA_CONFIG";

pub const DETECTIONS_FILE: &str = "detections.jsonl";
pub const TRUTH_FILE: &str = "truth.jsonl";
pub const SCENARIO_FILE: &str = "scenario.json";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("{}:{line}: frame {got} does not follow frame {previous}", path.display())]
    NonMonotone {
        path: PathBuf,
        line: usize,
        previous: u64,
        got: u64,
    },
    #[error("{}: {source}", path.display())]
    Config { path: PathBuf, source: ConfigError },
    #[error("{}: {source}", path.display())]
    Scenario { path: PathBuf, source: SimError },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionRecord {
    pub id: u32,
    #[serde(rename = "type")]
    pub object_type: String,
    #[serde(default = "one")]
    pub score: f64,
    pub pos: Vec2,
    pub size: Vec2,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionRecord {
    pub name: String,
    #[serde(default)]
    pub args: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameRecord {
    pub frame: u64,
    #[serde(default)]
    pub camera: Vec2,
    #[serde(default)]
    pub detections: Vec<DetectionRecord>,
    #[serde(default)]
    pub actions: Vec<ActionRecord>,
}

impl FrameRecord {
    pub fn from_frame(f: &Frame) -> Self {
        Self {
            frame: f.index,
            camera: f.camera,
            detections: f
                .percepts
                .iter()
                .map(|p| DetectionRecord {
                    id: p.id,
                    object_type: p.attributes.object_type.clone(),
                    score: p.score,
                    pos: p.attributes.position,
                    size: p.attributes.size,
                })
                .collect(),
            actions: f
                .actions
                .iter()
                .map(|a| ActionRecord {
                    name: a.name.clone(),
                    args: a.args.clone(),
                })
                .collect(),
        }
    }

    /// Checks field values; the error names the offending field.
    pub fn validate(&self) -> Result<(), String> {
        if !self.camera.is_finite() {
            return Err("field `camera` must be finite".into());
        }
        for (i, d) in self.detections.iter().enumerate() {
            if !(d.size.x > 0.0 && d.size.y > 0.0 && d.size.is_finite()) {
                return Err(format!("detection {i}: field `size` must be positive, got {}", d.size));
            }
            if !d.pos.is_finite() {
                return Err(format!("detection {i}: field `pos` must be finite"));
            }
            if !d.score.is_finite() {
                return Err(format!("detection {i}: field `score` must be finite"));
            }
            if d.object_type.is_empty() {
                return Err(format!("detection {i}: field `type` must not be empty"));
            }
        }
        Ok(())
    }

    pub fn into_frame(self) -> Frame {
        let index = self.frame;
        Frame {
            index,
            camera: self.camera,
            percepts: self
                .detections
                .into_iter()
                .map(|d| Percept {
                    id: d.id,
                    attributes: Attributes::new(d.object_type, d.pos, d.size),
                    score: d.score,
                })
                .collect(),
            actions: self
                .actions
                .into_iter()
                .map(|a| ActionEvent {
                    name: a.name,
                    args: a.args,
                    frame_index: index,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnchorRecord {
    pub id: String,
    #[serde(rename = "type")]
    pub object_type: String,
    pub pos: Vec2,
    pub size: Vec2,
    pub conf: f64,
    pub status: AnchorStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<String>,
}

impl From<&Anchor> for AnchorRecord {
    fn from(a: &Anchor) -> Self {
        Self {
            id: a.id.to_string(),
            object_type: a.attributes.object_type.clone(),
            pos: a.attributes.position,
            size: a.attributes.size,
            conf: a.confidence,
            status: a.status,
            parent: a.parent.as_ref().map(|p| p.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldRecord {
    pub frame: u64,
    pub anchors: Vec<AnchorRecord>,
}

impl WorldRecord {
    pub fn from_anchors<'a>(frame: u64, anchors: impl IntoIterator<Item = &'a Anchor>) -> Self {
        Self {
            frame,
            anchors: anchors.into_iter().map(AnchorRecord::from).collect(),
        }
    }

    pub fn from_model(model: &WorldModel) -> Self {
        Self::from_anchors(model.frame_index.unwrap_or(0), &model.anchors)
    }

    /// Box of the most confident anchor of `object_type`, ties to the smaller id.
    pub fn target_box(&self, object_type: &str) -> Option<BBox> {
        self.anchors
            .iter()
            .filter(|a| a.object_type == object_type)
            .max_by(|a, b| a.conf.total_cmp(&b.conf).then_with(|| b.id.cmp(&a.id)))
            .map(|a| BBox::new(a.pos, a.size))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub frame: u64,
    #[serde(rename = "box")]
    pub bbox: Option<BBox>,
}

fn read_lines<T: DeserializeOwned>(
    path: &Path,
    mut check: impl FnMut(&T, usize) -> Result<(), IoError>,
) -> Result<Vec<T>, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line).map_err(|e| IoError::Parse {
            path: path.to_owned(),
            line: i + 1,
            message: e.to_string(),
        })?;
        check(&record, i + 1)?;
        out.push(record);
    }
    Ok(out)
}

fn write_lines<'a, T: Serialize + 'a>(path: &Path, records: impl IntoIterator<Item = &'a T>) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| io_err(path)(e.into()))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

fn monotone(path: &Path, previous: &mut Option<u64>, frame: u64, line: usize) -> Result<(), IoError> {
    if let Some(p) = *previous {
        if frame <= p {
            return Err(IoError::NonMonotone {
                path: path.to_owned(),
                line,
                previous: p,
                got: frame,
            });
        }
    }
    *previous = Some(frame);
    Ok(())
}

/// Reads a detection stream. Frame indices must strictly increase.
pub fn read_detection_stream(path: &Path) -> Result<Vec<Frame>, IoError> {
    let mut previous = None;
    let records: Vec<FrameRecord> = read_lines(path, |r: &FrameRecord, line| {
        r.validate().map_err(|message| IoError::Parse {
            path: path.to_owned(),
            line,
            message,
        })?;
        monotone(path, &mut previous, r.frame, line)
    })?;
    Ok(records.into_iter().map(FrameRecord::into_frame).collect())
}

pub fn write_detection_stream(path: &Path, frames: &[Frame]) -> Result<(), IoError> {
    let records: Vec<FrameRecord> = frames.iter().map(FrameRecord::from_frame).collect();
    write_lines(path, &records)
}

pub fn write_world_stream(path: &Path, records: &[WorldRecord]) -> Result<(), IoError> {
    write_lines(path, records)
}

pub fn read_world_stream(path: &Path) -> Result<Vec<WorldRecord>, IoError> {
    let mut previous = None;
    read_lines(path, |r: &WorldRecord, line| monotone(path, &mut previous, r.frame, line))
}

pub fn write_prediction_stream(path: &Path, records: &[PredictionRecord]) -> Result<(), IoError> {
    write_lines(path, records)
}

pub fn read_prediction_stream(path: &Path) -> Result<Vec<PredictionRecord>, IoError> {
    let mut previous = None;
    read_lines(path, |r: &PredictionRecord, line| {
        monotone(path, &mut previous, r.frame, line)
    })
}

/// Reads either a prediction stream or a world stream (taking the most
/// confident anchor of `target_type` per frame).
pub fn read_target_predictions(path: &Path, target_type: &str) -> Result<Vec<PredictionRecord>, IoError> {
    let first = fs::read_to_string(path).map_err(io_err(path))?;
    let is_world = first
        .lines()
        .find(|l| !l.trim().is_empty())
        .and_then(|l| serde_json::from_str::<serde_json::Value>(l).ok())
        .is_some_and(|v| v.get("anchors").is_some());
    if is_world {
        Ok(read_world_stream(path)?
            .into_iter()
            .map(|w| PredictionRecord {
                frame: w.frame,
                bbox: w.target_box(target_type),
            })
            .collect())
    } else {
        read_prediction_stream(path)
    }
}

pub fn read_truth_stream(path: &Path) -> Result<Vec<TruthFrame>, IoError> {
    let mut previous = None;
    read_lines(path, |r: &TruthFrame, line| monotone(path, &mut previous, r.frame, line))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    config: ScenarioConfig,
    script: Vec<ScriptEvent>,
}

/// Writes `scenario.json`, `truth.jsonl` and `detections.jsonl` into `dir`.
pub fn save_scenario(dir: &Path, record: &ScenarioRecord) -> Result<(), IoError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let meta = ScenarioFile {
        config: record.config.clone(),
        script: record.script.clone(),
    };
    let path = dir.join(SCENARIO_FILE);
    let text = serde_json::to_string_pretty(&meta).expect("scenario serializes");
    fs::write(&path, text + "\n").map_err(io_err(&path))?;
    write_lines(&dir.join(TRUTH_FILE), &record.truth)?;
    write_detection_stream(&dir.join(DETECTIONS_FILE), &record.detections)
}

pub fn load_scenario(dir: &Path) -> Result<ScenarioRecord, IoError> {
    let path = dir.join(SCENARIO_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let meta: ScenarioFile = serde_json::from_str(&text).map_err(|e| IoError::Parse {
        path: path.clone(),
        line: e.line(),
        message: e.to_string(),
    })?;
    let truth = read_truth_stream(&dir.join(TRUTH_FILE))?;
    let detections = read_detection_stream(&dir.join(DETECTIONS_FILE))?;
    let events = detections.iter().flat_map(|f| f.actions.iter().cloned()).collect();
    Ok(ScenarioRecord {
        config: meta.config,
        script: meta.script,
        truth,
        events,
        detections,
    })
}

/// Scenario config from a `.toml` file, or JSON otherwise.
pub fn load_scenario_config(path: &Path) -> Result<ScenarioConfig, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let parsed: Result<ScenarioConfig, String> = if path.extension().is_some_and(|e| e == "toml") {
        toml::from_str(&text).map_err(|e| e.to_string())
    } else {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    };
    let config = parsed.map_err(|message| IoError::Parse {
        path: path.to_owned(),
        line: 0,
        message,
    })?;
    config.validate().map_err(|source| IoError::Scenario {
        path: path.to_owned(),
        source,
    })?;
    Ok(config)
}

/// Engine config: an explicit file, else the file named by [`CONFIG_ENV`],
/// else the named preset (default `benchmark`). A file given alongside a
/// preset overrides the preset's fields only where it sets them.
pub fn load_engine_config(path: Option<&Path>, preset: Option<&str>) -> Result<EngineConfig, IoError> {
    let env_path = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
    let path = path.map(Path::to_owned).or(env_path);
    let preset_name = preset.unwrap_or("benchmark");
    let base = EngineConfig::preset(preset_name).ok_or_else(|| IoError::Config {
        path: PathBuf::from(preset_name),
        source: ConfigError::Invalid(format!("unknown preset {preset_name}")),
    })?;
    let Some(path) = path else {
        return Ok(base);
    };
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let config = if preset.is_some() {
        EngineConfig::overlay_toml(base, &text)
    } else {
        EngineConfig::from_toml(&text)
    };
    config.map_err(|source| IoError::Config { path, source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::AnchorId;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn empty_file_is_empty_stream() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "d.jsonl", "");
        assert!(read_detection_stream(&p).unwrap().is_empty());
    }

    #[test]
    fn one_line_is_one_frame() {
        let d = tempfile::tempdir().unwrap();
        let line = r#"{"frame": 3, "camera": [1, 2], "detections": [{"id": 0, "type": "cube", "score": 0.9, "pos": [10, 20], "size": [5, 6]}], "actions": [{"name": "contain", "args": ["cone0", "snitch0"]}]}"#;
        let p = write(d.path(), "d.jsonl", line);
        let frames = read_detection_stream(&p).unwrap();
        assert_eq!(frames.len(), 1);
        let f = &frames[0];
        assert_eq!((f.index, f.camera), (3, Vec2::new(1.0, 2.0)));
        assert_eq!(f.percepts[0].attributes.size, Vec2::new(5.0, 6.0));
        assert_eq!(f.actions[0].args, vec!["cone0", "snitch0"]);
        assert_eq!(f.actions[0].frame_index, 3);
    }

    #[test]
    fn negative_size_names_the_field_and_line() {
        let d = tempfile::tempdir().unwrap();
        let text = "{\"frame\": 0}\n{\"frame\": 1, \"detections\": [{\"id\": 0, \"type\": \"cube\", \"pos\": [1, 1], \"size\": [-2, 4]}]}\n";
        let p = write(d.path(), "d.jsonl", text);
        let err = read_detection_stream(&p).unwrap_err();
        assert!(matches!(err, IoError::Parse { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("`size`"), "{err}");
    }

    #[test]
    fn malformed_and_non_monotone_lines_are_rejected() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "a.jsonl", "{\"frame\": 0}\nnot json\n");
        assert!(matches!(read_detection_stream(&p), Err(IoError::Parse { line: 2, .. })));
        let p = write(d.path(), "b.jsonl", "{\"frame\": 4}\n{\"frame\": 4}\n");
        assert!(matches!(
            read_detection_stream(&p),
            Err(IoError::NonMonotone { previous: 4, got: 4, .. })
        ));
        let missing = d.path().join("nope.jsonl");
        let err = read_detection_stream(&missing).unwrap_err();
        assert!(err.to_string().contains("nope.jsonl"));
    }

    #[test]
    fn world_stream_round_trip_and_parent_field() {
        let d = tempfile::tempdir().unwrap();
        let mut cone = Anchor::new(
            AnchorId::from("cone0"),
            Attributes::new("cone", Vec2::new(5.0, 5.0), Vec2::new(30.0, 30.0)),
            1.0,
            7,
        );
        cone.status = AnchorStatus::Visible;
        let mut snitch = Anchor::new(
            AnchorId::from("snitch0"),
            Attributes::new("snitch", Vec2::new(5.0, 5.0), Vec2::new(12.0, 12.0)),
            0.6,
            4,
        );
        snitch.parent = Some(AnchorId::from("cone0"));
        snitch.parent_offset = Some(Vec2::ZERO);
        snitch.status = AnchorStatus::Attached;
        let records = vec![
            WorldRecord::from_anchors(6, []),
            WorldRecord::from_anchors(7, [&cone, &snitch]),
        ];
        let p = d.path().join("w.jsonl");
        write_world_stream(&p, &records).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], r#"{"frame":6,"anchors":[]}"#);
        assert!(lines[1].contains(r#""parent":"cone0""#));
        assert_eq!(read_world_stream(&p).unwrap(), records);
        let preds = read_target_predictions(&p, "snitch").unwrap();
        assert_eq!(preds[0].bbox, None);
        assert_eq!(preds[1].bbox.unwrap().size, Vec2::new(12.0, 12.0));
    }

    #[test]
    fn prediction_stream_round_trip() {
        let d = tempfile::tempdir().unwrap();
        let records = vec![
            PredictionRecord { frame: 0, bbox: None },
            PredictionRecord {
                frame: 1,
                bbox: Some(BBox::new(Vec2::new(1.0, 2.0), Vec2::new(3.0, 4.0))),
            },
        ];
        let p = d.path().join("p.jsonl");
        write_prediction_stream(&p, &records).unwrap();
        assert!(fs::read_to_string(&p).unwrap().starts_with(r#"{"frame":0,"box":null}"#));
        assert_eq!(read_target_predictions(&p, "snitch").unwrap(), records);
    }

    #[test]
    fn scenario_directory_round_trip() {
        let d = tempfile::tempdir().unwrap();
        let record = crate::sim::generate(&crate::sim::preset("mixed", 2).unwrap()).unwrap();
        save_scenario(d.path(), &record).unwrap();
        let loaded = load_scenario(d.path()).unwrap();
        assert_eq!(loaded.config, record.config);
        assert_eq!(loaded.script, record.script);
        assert_eq!(loaded.events, record.events);
        for (a, b) in loaded.truth.iter().zip(&record.truth) {
            assert_eq!(a, b);
        }
        for (a, b) in loaded.detections.iter().zip(&record.detections) {
            assert_eq!(a, b);
        }
        assert_eq!(loaded, record);
    }
}
