use aapa_core::eval::{aggregate, score_stream, BucketMeans, TargetTruth, VideoScore};
use aapa_core::io::{read_world_stream, write_world_stream, WorldRecord};
use aapa_core::sim::{generate, preset, NoiseConfig, GHOST_ID_BASE};
use aapa_core::tracker::query;
use aapa_core::{
    apply_action, iou, ActionEvent, Anchor, Attributes, BBox, Bucket, Engine, EngineConfig, Frame, Percept,
    QueryLevel, Subtask, Vec2, WorldModel,
};

fn percept(id: u32, t: &str, x: f64, y: f64, w: f64) -> Percept {
    Percept::new(id, Attributes::new(t, Vec2::new(x, y), Vec2::new(w, w)))
}

#[test]
fn one_frame_ghosts_never_reach_the_anchoring_threshold() {
    let mut scenario = preset("ghosts", 4).unwrap();
    scenario.noise = NoiseConfig {
        ghost_rate: 1.0,
        ghost_frames: 1,
        ..NoiseConfig::default()
    };
    let record = generate(&scenario).unwrap();
    let config = EngineConfig {
        kappa_anch: 0.1,
        conf_inc: 0.05,
        ..EngineConfig::benchmark()
    };
    let mut engine = Engine::new(config.clone()).unwrap();
    let mut ghost_frames = 0;
    for (truth, frame) in record.truth.iter().zip(&record.detections) {
        ghost_frames += usize::from(frame.percepts.iter().any(|p| p.id >= GHOST_ID_BASE));
        engine.step(frame).unwrap();
        for a in query(engine.world(), &config, QueryLevel::Anchored) {
            let real = truth
                .objects
                .iter()
                .any(|o| o.object_type == a.attributes.object_type && iou(&o.bbox(), &a.bbox()) >= 0.5);
            assert!(real, "frame {}: {} is not a real object", frame.index, a.id);
        }
    }
    assert_eq!(ghost_frames, record.detections.len());
}

#[test]
fn world_stream_carries_the_parent() {
    let config = EngineConfig::benchmark();
    let mut model = WorldModel::new();
    for (t, x) in [("cone", 100.0), ("snitch", 100.0)] {
        let id = model.allocate_id(t);
        model
            .anchors
            .push(Anchor::new(id, Attributes::new(t, Vec2::new(x, 80.0), Vec2::new(30.0, 30.0)), 1.0, 3));
    }
    apply_action(&mut model, &ActionEvent::new("contain", ["cone0", "snitch0"], 3), &config).unwrap();
    model.frame_index = Some(3);

    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("world.jsonl");
    let records = [WorldRecord::from_model(&model), WorldRecord::from_model(&WorldModel::new())];
    write_world_stream(&path, &records[..1]).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains("\"parent\":\"cone0\""), "{text}");

    let mut empty = records[1].clone();
    empty.frame = 4;
    write_world_stream(&path, &[records[0].clone(), empty.clone()]).unwrap();
    let back = read_world_stream(&path).unwrap();
    assert_eq!(back, vec![records[0].clone(), empty]);
    assert!(std::fs::read_to_string(&path).unwrap().contains("\"anchors\":[]"));
}

#[test]
fn across_video_mean_and_standard_error() {
    let video = |l2: f64| VideoScore {
        buckets: [(
            Bucket::Overall,
            BucketMeans {
                iou: 0.5,
                l2,
                frames: 10,
            },
        )]
        .into_iter()
        .collect(),
        excluded: false,
    };
    let rows = aggregate("aapa", &[video(2.0), video(4.0)]);
    let overall = rows.iter().find(|r| r.subtask == "overall").unwrap();
    assert_eq!(overall.mean_l2, 3.0);
    assert_eq!(overall.sem_l2, 1.0);
    assert_eq!(overall.n_videos, 2);
    assert_eq!(overall.sem_iou, 0.0);
}

#[test]
fn videos_without_a_detection_are_excluded() {
    let truth = vec![
        TargetTruth {
            bbox: BBox::new(Vec2::new(50.0, 50.0), Vec2::new(10.0, 10.0)),
            label: Subtask::Occluded,
            detected: false,
        };
        5
    ];
    let preds = vec![None; 5];
    let table = score_stream("aapa", &[(&preds, &truth)]).unwrap();
    assert_eq!(table.videos, 1);
    assert_eq!(table.excluded_videos, 1);
    assert_eq!(table.row("aapa", Bucket::Overall).unwrap().n_videos, 0);
}

#[test]
fn carried_snitch_follows_its_cone() {
    let config = EngineConfig::benchmark();
    let mut engine = Engine::new(config).unwrap();
    let frame = |index: u64, percepts: Vec<Percept>, actions: Vec<ActionEvent>| Frame {
        index,
        percepts,
        actions,
        ..Frame::default()
    };
    for i in 0..3 {
        engine
            .step(&frame(
                i,
                vec![percept(0, "cone", 100.0, 100.0, 30.0), percept(1, "snitch", 160.0, 100.0, 12.0)],
                vec![],
            ))
            .unwrap();
    }
    // The cone comes down on the snitch; the containment is reported once it
    // has arrived, then the cone slides 50 px right with the snitch inside.
    engine.step(&frame(3, vec![percept(0, "cone", 160.0, 100.0, 30.0)], vec![])).unwrap();
    engine
        .step(&frame(
            4,
            vec![percept(0, "cone", 160.0, 100.0, 30.0)],
            vec![ActionEvent::new("contain", ["cone0", "snitch0"], 4)],
        ))
        .unwrap();
    for (k, x) in [(5, 170.0), (6, 190.0), (7, 210.0)] {
        engine.step(&frame(k, vec![percept(0, "cone", x, 100.0, 30.0)], vec![])).unwrap();
    }
    let snitch = engine.world().anchor(&"snitch0".into()).unwrap();
    assert_eq!(snitch.attributes.position, Vec2::new(210.0, 100.0));
    assert_eq!(snitch.parent.as_ref().map(ToString::to_string).as_deref(), Some("cone0"));
}
