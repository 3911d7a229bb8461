use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn aapa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aapa"))
        .args(args)
        .env_remove("AAPA_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = aapa(args);
    assert!(
        out.status.success(),
        "aapa {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 path")
}

#[test]
fn simulate_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        ok(&["simulate", "--seed", "7", "--frames", "300", "--out", s(dir)]);
    }
    for file in ["scenario.json", "truth.jsonl", "detections.jsonl"] {
        let left = fs::read(a.join(file)).unwrap();
        assert!(!left.is_empty());
        assert_eq!(left, fs::read(b.join(file)).unwrap(), "{file} differs");
    }
}

#[test]
fn track_then_eval_is_exact_on_visible_only() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = tmp.path().join("scen");
    let preds = tmp.path().join("preds.jsonl");
    let world = tmp.path().join("world.jsonl");
    ok(&["simulate", "--preset", "visible_only", "--seed", "3", "--out", s(&scen)]);
    ok(&[
        "track",
        "--tracker=aapa",
        "--input",
        s(&scen),
        "--predictions",
        s(&preds),
        "--world",
        s(&world),
    ]);

    let json = ok(&["eval", "--predictions", s(&preds), "--scenario", s(&scen), "--format", "json"]);
    let rows: serde_json::Value = serde_json::from_str(&json).unwrap();
    let overall = rows
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["subtask"] == "overall")
        .unwrap();
    assert_eq!(overall["mean_iou"], 1.0);
    assert_eq!(overall["mean_l2"], 0.0);

    // the world stream is accepted by eval too
    let csv = ok(&["eval", "--predictions", s(&world), "--scenario", s(&scen), "--format", "csv"]);
    assert!(csv.starts_with("tracker,subtask,mean_iou,sem_iou,mean_l2,sem_l2,n_videos"));
    let first = fs::read_to_string(&world).unwrap();
    assert!(first.lines().next().unwrap().contains("\"anchors\""));
}

#[test]
fn heuristic_predictions_go_to_stdout() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = tmp.path().join("scen");
    ok(&["simulate", "--seed", "1", "--frames", "40", "--out", s(&scen)]);
    let out = ok(&["track", "--tracker", "heuristic", "--input", s(&scen.join("detections.jsonl"))]);
    assert_eq!(out.lines().count(), 40);
    assert!(out.lines().all(|l| l.contains("\"frame\"") && l.contains("\"box\"")));
}

#[test]
fn compare_favours_aapa_on_carried() {
    let tmp = tempfile::tempdir().unwrap();
    let suite = tmp.path().join("suite");
    let csv = tmp.path().join("rows.csv");
    ok(&[
        "simulate",
        "--preset",
        "carried_distractor",
        "--seed",
        "0",
        "--count",
        "6",
        "--out",
        s(&suite),
    ]);
    assert_eq!(fs::read_dir(&suite).unwrap().count(), 6);

    let json = ok(&["compare", "--scenarios", s(&suite), "--format", "json", "--out", s(&csv)]);
    let rows: serde_json::Value = serde_json::from_str(&json).unwrap();
    let carried_l2 = |tracker: &str| {
        rows.as_array()
            .unwrap()
            .iter()
            .find(|r| r["tracker"] == tracker && r["subtask"] == "carried")
            .unwrap()["mean_l2"]
            .as_f64()
            .unwrap()
    };
    assert!(carried_l2("aapa") < carried_l2("heuristic"));
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().count(), 11);

    let table = ok(&["compare", "--scenarios", s(&suite)]);
    assert!(table.contains("Mean IoU") && table.contains("carried") && table.contains("heuristic"));
}

#[test]
fn engine_config_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let scen = tmp.path().join("scen");
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "tau = -1.0\n").unwrap();
    ok(&["simulate", "--frames", "10", "--out", s(&scen)]);
    let out = Command::new(env!("CARGO_BIN_EXE_aapa"))
        .args(["track", "--input", s(&scen)])
        .env("AAPA_CONFIG", &cfg)
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("tau"));
}

#[test]
fn errors_exit_nonzero_with_a_message() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nope.jsonl");

    let unknown_flag = aapa(&["track", "--bogus"]);
    assert!(!unknown_flag.status.success());
    assert!(String::from_utf8_lossy(&unknown_flag.stderr).contains("--bogus"));

    let missing_file = aapa(&["track", "--input", s(&missing)]);
    assert!(!missing_file.status.success());
    assert!(String::from_utf8_lossy(&missing_file.stderr).contains("nope.jsonl"));

    let bad_preset = aapa(&["simulate", "--preset", "nonsense", "--out", s(tmp.path())]);
    assert!(!bad_preset.status.success());
    assert!(String::from_utf8_lossy(&bad_preset.stderr).contains("nonsense"));

    let cfg = tmp.path().join("engine.toml");
    fs::write(&cfg, "kappa_anch = 2.0\n").unwrap();
    let scen = tmp.path().join("scen");
    ok(&["simulate", "--frames", "5", "--out", s(&scen)]);
    let invalid = aapa(&["track", "--input", s(&scen), "--config", s(&cfg)]);
    assert!(!invalid.status.success());
    assert!(!invalid.stderr.is_empty());

    let bad_line = tmp.path().join("bad.jsonl");
    fs::write(&bad_line, "{\"frame\": 0}\nnot json\n").unwrap();
    let parse = aapa(&["track", "--input", s(&bad_line)]);
    assert!(!parse.status.success());
    assert!(String::from_utf8_lossy(&parse.stderr).contains("line"));
}
