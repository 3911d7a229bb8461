use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use aapa_core::eval::{aggregate, format_table, rows_to_csv, rows_to_json, score_video, SubtaskRow, VideoScore};
use aapa_core::io::{
    load_engine_config, load_scenario, load_scenario_config, read_detection_stream, read_target_predictions,
    save_scenario, write_prediction_stream, write_world_stream, PredictionRecord, WorldRecord, DETECTIONS_FILE,
    SCENARIO_FILE,
};
use aapa_core::sim::{generate, preset, ScenarioConfig, ScenarioRecord, PRESETS, TARGET_TYPE};
use aapa_core::{predict_target, run_tracker, BBox, Engine, EngineConfig, Frame, HeuristicTracker, QueryLevel};
use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "aapa", version, about = "Object-permanence tracking by action-aware perceptual anchoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic scenarios (detections, ground truth and script).
    Simulate(SimulateArgs),
    /// Run a tracker over a detection stream.
    Track(TrackArgs),
    /// Score target predictions against a scenario's ground truth.
    Eval(EvalArgs),
    /// Run both trackers over a directory of scenarios and tabulate per subtask.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TrackerKind {
    Aapa,
    Heuristic,
}

impl TrackerKind {
    fn name(self) -> &'static str {
        match self {
            TrackerKind::Aapa => "aapa",
            TrackerKind::Heuristic => "heuristic",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Csv,
    Json,
}

#[derive(clap::Args)]
struct EngineArgs {
    /// Engine config (TOML). Falls back to $AAPA_CONFIG.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named engine parameter set: benchmark or assembly.
    #[arg(long)]
    preset: Option<String>,
}

impl EngineArgs {
    fn load(&self) -> Result<EngineConfig> {
        Ok(load_engine_config(self.config.as_deref(), self.preset.as_deref())?)
    }
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Scenario config file (JSON, or TOML by extension).
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Named scenario family.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    frames: Option<u64>,
    /// Number of consecutive seeds; more than one writes a subdirectory per seed.
    #[arg(long, default_value_t = 1)]
    count: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct TrackArgs {
    #[arg(long, value_enum, default_value = "aapa")]
    tracker: TrackerKind,
    #[command(flatten)]
    engine: EngineArgs,
    /// Detection stream, or a scenario directory holding one.
    #[arg(long)]
    input: PathBuf,
    /// World stream output (anchored anchors per frame; aapa only).
    #[arg(long)]
    world: Option<PathBuf>,
    /// Target prediction output; printed to stdout when no output is given.
    #[arg(long)]
    predictions: Option<PathBuf>,
    #[arg(long, default_value = TARGET_TYPE)]
    target: String,
}

#[derive(clap::Args)]
struct EvalArgs {
    /// Prediction stream or world stream.
    #[arg(long)]
    predictions: PathBuf,
    /// Scenario directory with ground truth.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long, default_value = TARGET_TYPE)]
    target: String,
    /// Tracker name used in the output rows.
    #[arg(long, default_value = "tracker")]
    name: String,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
}

#[derive(clap::Args)]
struct CompareArgs {
    /// Directory of scenario directories.
    #[arg(long)]
    scenarios: PathBuf,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, value_enum, default_value = "table")]
    format: Format,
    /// Also write the rows to this file (CSV, or JSON by extension).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate(a) => simulate(a),
        Command::Track(a) => track(a),
        Command::Eval(a) => eval(a),
        Command::Compare(a) => compare(a),
    }
}

fn scenario_config(args: &SimulateArgs, seed: u64) -> Result<ScenarioConfig> {
    let mut config = match (&args.config, &args.preset) {
        (Some(path), _) => {
            let mut c = load_scenario_config(path)?;
            if args.seed.is_some() || args.count > 1 {
                c.seed = seed;
            }
            c
        }
        (None, Some(name)) => preset(name, seed)
            .with_context(|| format!("unknown scenario preset `{name}` (known: {})", PRESETS.join(", ")))?,
        (None, None) => ScenarioConfig {
            seed,
            ..ScenarioConfig::default()
        },
    };
    if let Some(frames) = args.frames {
        config.frames = frames;
    }
    Ok(config)
}

fn simulate(args: SimulateArgs) -> Result<()> {
    ensure!(args.count > 0, "--count must be positive");
    let first = match (args.seed, &args.config) {
        (Some(s), _) => s,
        (None, Some(path)) => load_scenario_config(path)?.seed,
        (None, None) => 0,
    };
    for seed in first..first + args.count {
        let config = scenario_config(&args, seed)?;
        let record = generate(&config).with_context(|| format!("scenario seed {seed}"))?;
        let dir = if args.count == 1 {
            args.out.clone()
        } else {
            let family = args.preset.as_deref().unwrap_or("scenario");
            args.out.join(format!("{family}-{seed:04}"))
        };
        save_scenario(&dir, &record)?;
    }
    Ok(())
}

fn detections_path(input: &Path) -> PathBuf {
    if input.is_dir() {
        input.join(DETECTIONS_FILE)
    } else {
        input.to_owned()
    }
}

fn track(args: TrackArgs) -> Result<()> {
    let frames = read_detection_stream(&detections_path(&args.input))?;
    let config = args.engine.load()?;
    let (boxes, worlds) = match args.tracker {
        TrackerKind::Aapa => {
            let mut engine = Engine::new(config)?;
            let mut boxes = Vec::with_capacity(frames.len());
            let mut worlds = Vec::with_capacity(frames.len());
            for f in &frames {
                engine.step(f)?;
                boxes.push(predict_target(engine.world(), engine.config(), &args.target));
                worlds.push(WorldRecord::from_anchors(f.index, engine.query(QueryLevel::Anchored)));
            }
            (boxes, Some(worlds))
        }
        TrackerKind::Heuristic => {
            if args.world.is_some() {
                bail!("--world needs --tracker aapa; the heuristic keeps no world model");
            }
            (run_tracker(&mut HeuristicTracker::new(&args.target), &frames)?, None)
        }
    };

    let predictions = prediction_records(&frames, &boxes);
    if let (Some(path), Some(worlds)) = (&args.world, &worlds) {
        write_world_stream(path, worlds)?;
    }
    match &args.predictions {
        Some(path) => write_prediction_stream(path, &predictions)?,
        None if args.world.is_none() => {
            for p in &predictions {
                println!("{}", serde_json::to_string(p)?);
            }
        }
        None => {}
    }
    Ok(())
}

fn prediction_records(frames: &[Frame], boxes: &[Option<BBox>]) -> Vec<PredictionRecord> {
    frames
        .iter()
        .zip(boxes)
        .map(|(f, b)| PredictionRecord {
            frame: f.index,
            bbox: *b,
        })
        .collect()
}

fn eval(args: EvalArgs) -> Result<()> {
    let record = load_scenario(&args.scenario)?;
    let predictions = read_target_predictions(&args.predictions, &args.target)?;
    let by_frame: BTreeMap<u64, Option<BBox>> = predictions.into_iter().map(|p| (p.frame, p.bbox)).collect();
    let boxes: Vec<Option<BBox>> = record
        .truth
        .iter()
        .map(|t| by_frame.get(&t.frame).copied().flatten())
        .collect();
    let score = score_video(&boxes, &record.target_truth())?;
    if score.excluded {
        eprintln!("note: the target is never detected; no frames are scored");
    }
    print_rows(&aggregate(&args.name, &[score]), args.format);
    Ok(())
}

fn scenario_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    if root.join(SCENARIO_FILE).is_file() {
        return Ok(vec![root.to_owned()]);
    }
    let entries = fs::read_dir(root).with_context(|| format!("reading {}", root.display()))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.with_context(|| format!("reading {}", root.display()))?.path();
        if path.join(SCENARIO_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    ensure!(!dirs.is_empty(), "no scenario directories under {}", root.display());
    Ok(dirs)
}

fn score_both(record: &ScenarioRecord, config: &EngineConfig) -> Result<[VideoScore; 2]> {
    let truth = record.target_truth();
    let mut aapa = aapa_core::AapaTracker::new(config.clone(), TARGET_TYPE)?;
    let a = run_tracker(&mut aapa, &record.detections)?;
    let h = run_tracker(&mut HeuristicTracker::new(TARGET_TYPE), &record.detections)?;
    Ok([score_video(&a, &truth)?, score_video(&h, &truth)?])
}

fn compare(args: CompareArgs) -> Result<()> {
    let config = args.engine.load()?;
    let dirs = scenario_dirs(&args.scenarios)?;
    let scores = dirs
        .par_iter()
        .map(|dir| {
            let record = load_scenario(dir)?;
            score_both(&record, &config).with_context(|| format!("scenario {}", dir.display()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for (i, kind) in [TrackerKind::Aapa, TrackerKind::Heuristic].into_iter().enumerate() {
        let videos: Vec<VideoScore> = scores.iter().map(|s| s[i].clone()).collect();
        rows.extend(aggregate(kind.name(), &videos));
    }
    let excluded = scores.iter().filter(|s| s[0].excluded).count();
    if excluded > 0 {
        eprintln!("note: {excluded} of {} scenarios never detect the target and are excluded", dirs.len());
    }
    if let Some(path) = &args.out {
        let text = if path.extension().is_some_and(|e| e == "json") {
            rows_to_json(&rows)
        } else {
            rows_to_csv(&rows)
        };
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    print_rows(&rows, args.format);
    Ok(())
}

fn print_rows(rows: &[SubtaskRow], format: Format) {
    match format {
        Format::Table => print!("{}", format_table(rows)),
        Format::Csv => print!("{}", rows_to_csv(rows)),
        Format::Json => println!("{}", rows_to_json(rows)),
    }
}
