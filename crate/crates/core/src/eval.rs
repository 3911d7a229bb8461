//! Target-localisation scoring: mean IoU and mean center L² per subtask,
//! aggregated across videos with standard errors.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{BBox, Vec2};

/// Ground-truth situation of the target in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Subtask {
    Visible,
    Occluded,
    Contained,
    Carried,
}

impl Subtask {
    pub const ALL: [Subtask; 4] = [
        Subtask::Visible,
        Subtask::Occluded,
        Subtask::Contained,
        Subtask::Carried,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Subtask::Visible => "visible",
            Subtask::Occluded => "occluded",
            Subtask::Contained => "contained",
            Subtask::Carried => "carried",
        }
    }
}

impl fmt::Display for Subtask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A subtask bucket or the all-frames bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Bucket {
    Subtask(Subtask),
    Overall,
}

impl Bucket {
    pub const ALL: [Bucket; 5] = [
        Bucket::Subtask(Subtask::Visible),
        Bucket::Subtask(Subtask::Occluded),
        Bucket::Subtask(Subtask::Contained),
        Bucket::Subtask(Subtask::Carried),
        Bucket::Overall,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Bucket::Subtask(s) => s.as_str(),
            Bucket::Overall => "overall",
        }
    }
}

pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    inter / union
}

/// Center distance. A missing prediction counts as a box centered at the
/// origin, so the distance is the norm of the true center.
pub fn l2_center(pred: Option<&BBox>, truth: &BBox) -> f64 {
    let center = pred.map_or(Vec2::ZERO, |p| p.center);
    center.distance(truth.center)
}

/// What the scorer needs to know about the target in one frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetTruth {
    pub bbox: BBox,
    pub label: Subtask,
    /// Whether the detector reported the target in this frame.
    pub detected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BucketMeans {
    pub iou: f64,
    pub l2: f64,
    pub frames: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct VideoScore {
    /// Only buckets with at least one scored frame are present.
    pub buckets: BTreeMap<Bucket, BucketMeans>,
    /// Set when the target was never detected; such a video has no scored frames.
    pub excluded: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("prediction stream has {predictions} frames but ground truth has {truth}")]
    LengthMismatch { predictions: usize, truth: usize },
}

/// Scores one video from the first frame where the target was detected.
pub fn score_video(predictions: &[Option<BBox>], truth: &[TargetTruth]) -> Result<VideoScore, EvalError> {
    if predictions.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            truth: truth.len(),
        });
    }
    let Some(first) = truth.iter().position(|t| t.detected) else {
        return Ok(VideoScore {
            buckets: BTreeMap::new(),
            excluded: true,
        });
    };

    let mut sums: BTreeMap<Bucket, (f64, f64, usize)> = BTreeMap::new();
    for (pred, t) in predictions[first..].iter().zip(&truth[first..]) {
        let frame_iou = pred.as_ref().map_or(0.0, |p| iou(p, &t.bbox));
        let frame_l2 = l2_center(pred.as_ref(), &t.bbox);
        for bucket in [Bucket::Subtask(t.label), Bucket::Overall] {
            let e = sums.entry(bucket).or_insert((0.0, 0.0, 0));
            e.0 += frame_iou;
            e.1 += frame_l2;
            e.2 += 1;
        }
    }
    let buckets = sums
        .into_iter()
        .map(|(b, (i, l, n))| {
            (
                b,
                BucketMeans {
                    iou: i / n as f64,
                    l2: l / n as f64,
                    frames: n,
                },
            )
        })
        .collect();
    Ok(VideoScore {
        buckets,
        excluded: false,
    })
}

/// Mean and standard error of the mean (sample standard deviation over
/// √n). The error is zero for a single value and NaN for none.
pub fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt() / (n as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubtaskRow {
    pub tracker: String,
    pub subtask: String,
    pub mean_iou: f64,
    pub sem_iou: f64,
    pub mean_l2: f64,
    pub sem_l2: f64,
    pub n_videos: usize,
}

/// One row per bucket; each video contributes its per-bucket mean once.
pub fn aggregate(tracker: &str, videos: &[VideoScore]) -> Vec<SubtaskRow> {
    Bucket::ALL
        .iter()
        .map(|&bucket| {
            let per_video: Vec<&BucketMeans> = videos.iter().filter_map(|v| v.buckets.get(&bucket)).collect();
            let ious: Vec<f64> = per_video.iter().map(|b| b.iou).collect();
            let l2s: Vec<f64> = per_video.iter().map(|b| b.l2).collect();
            let (mean_iou, sem_iou) = mean_sem(&ious);
            let (mean_l2, sem_l2) = mean_sem(&l2s);
            SubtaskRow {
                tracker: tracker.to_owned(),
                subtask: bucket.as_str().to_owned(),
                mean_iou,
                sem_iou,
                mean_l2,
                sem_l2,
                n_videos: per_video.len(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub rows: Vec<SubtaskRow>,
    pub videos: usize,
    pub excluded_videos: usize,
}

impl ScoreTable {
    pub fn row(&self, tracker: &str, bucket: Bucket) -> Option<&SubtaskRow> {
        self.rows
            .iter()
            .find(|r| r.tracker == tracker && r.subtask == bucket.as_str())
    }
}

/// Scores a batch of videos for one tracker.
pub fn score_stream(tracker: &str, runs: &[(&[Option<BBox>], &[TargetTruth])]) -> Result<ScoreTable, EvalError> {
    let videos = runs
        .iter()
        .map(|(p, t)| score_video(p, t))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ScoreTable {
        rows: aggregate(tracker, &videos),
        videos: videos.len(),
        excluded_videos: videos.iter().filter(|v| v.excluded).count(),
    })
}

pub fn rows_to_csv(rows: &[SubtaskRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv write");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("csv output is utf-8")
}

pub fn rows_to_json(rows: &[SubtaskRow]) -> String {
    serde_json::to_string_pretty(rows).expect("rows serialize")
}

/// Side-by-side text table: one block for IoU (in percent), one for L² (px).
pub fn format_table(rows: &[SubtaskRow]) -> String {
    let mut trackers: Vec<&str> = Vec::new();
    for r in rows {
        if !trackers.contains(&r.tracker.as_str()) {
            trackers.push(&r.tracker);
        }
    }
    let cell = |tracker: &str, bucket: Bucket, iou: bool| -> String {
        match rows.iter().find(|r| r.tracker == tracker && r.subtask == bucket.as_str()) {
            Some(r) if r.n_videos > 0 && iou => format!("{:6.2} ±{:.2}", r.mean_iou * 100.0, r.sem_iou * 100.0),
            Some(r) if r.n_videos > 0 => format!("{:6.2} ±{:.2}", r.mean_l2, r.sem_l2),
            _ => "-".to_owned(),
        }
    };
    let mut out = String::new();
    for (title, iou) in [("Mean IoU ±SEM", true), ("Mean L2 ±SEM", false)] {
        let _ = write!(out, "{title:<16}");
        for b in Bucket::ALL {
            let _ = write!(out, "{:>16}", b.as_str());
        }
        out.push('\n');
        for t in &trackers {
            let _ = write!(out, "{t:<16}");
            for b in Bucket::ALL {
                let _ = write!(out, "{:>16}", cell(t, b, iou));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corners(x0: f64, y0: f64, x1: f64, y1: f64) -> BBox {
        BBox::from_corners(Vec2::new(x0, y0), Vec2::new(x1, y1))
    }

    fn truth(center: Vec2, label: Subtask, detected: bool) -> TargetTruth {
        TargetTruth {
            bbox: BBox::new(center, Vec2::new(10.0, 10.0)),
            label,
            detected,
        }
    }

    #[test]
    fn iou_examples() {
        let a = corners(0.0, 0.0, 10.0, 10.0);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &corners(20.0, 20.0, 30.0, 30.0)), 0.0);
        let b = corners(5.0, 0.0, 15.0, 10.0);
        assert_eq!(iou(&a, &b), 50.0 / 150.0);
    }

    #[test]
    fn l2_examples() {
        let t = BBox::new(Vec2::new(3.0, 4.0), Vec2::new(2.0, 2.0));
        assert_eq!(l2_center(Some(&t), &t), 0.0);
        let origin = BBox::new(Vec2::ZERO, Vec2::new(2.0, 2.0));
        assert_eq!(l2_center(Some(&origin), &t), 5.0);
        let t = BBox::new(Vec2::new(100.0, 50.0), Vec2::new(2.0, 2.0));
        assert_eq!(l2_center(None, &t), 12500f64.sqrt());
    }

    #[test]
    fn perfect_predictions_score_one_and_zero() {
        let truths: Vec<TargetTruth> = Subtask::ALL
            .iter()
            .enumerate()
            .map(|(i, &s)| truth(Vec2::new(10.0 * i as f64 + 20.0, 30.0), s, true))
            .collect();
        let preds: Vec<Option<BBox>> = truths.iter().map(|t| Some(t.bbox)).collect();
        let v = score_video(&preds, &truths).unwrap();
        assert_eq!(v.buckets.len(), 5);
        for b in v.buckets.values() {
            assert_eq!((b.iou, b.l2), (1.0, 0.0));
        }
    }

    #[test]
    fn never_detected_video_is_excluded() {
        let truths = vec![truth(Vec2::new(5.0, 5.0), Subtask::Occluded, false); 4];
        let v = score_video(&[None; 4], &truths).unwrap();
        assert!(v.excluded && v.buckets.is_empty());
        let table = score_stream("aapa", &[(&[None; 4], &truths)]).unwrap();
        assert_eq!(table.excluded_videos, 1);
        assert_eq!(table.row("aapa", Bucket::Overall).unwrap().n_videos, 0);
    }

    #[test]
    fn sem_across_videos() {
        let (m, s) = mean_sem(&[2.0, 4.0]);
        assert_eq!((m, s), (3.0, 1.0));
        assert_eq!(mean_sem(&[7.0]), (7.0, 0.0));
        assert!(mean_sem(&[]).0.is_nan());
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let truths = vec![truth(Vec2::new(5.0, 5.0), Subtask::Visible, true)];
        assert_eq!(
            score_video(&[None, None], &truths),
            Err(EvalError::LengthMismatch { predictions: 2, truth: 1 })
        );
    }

    #[test]
    fn csv_and_json_have_documented_columns() {
        let rows = aggregate("aapa", &[]);
        let csv = rows_to_csv(&rows);
        assert!(csv.starts_with("tracker,subtask,mean_iou,sem_iou,mean_l2,sem_l2,n_videos\n"));
        assert_eq!(csv.lines().count(), 6);
        let json: serde_json::Value = serde_json::from_str(&rows_to_json(&rows)).unwrap();
        assert_eq!(json.as_array().unwrap().len(), 5);
    }
}
