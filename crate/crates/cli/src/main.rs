//! `d4d`: stage-by-stage and end-to-end driver.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use d4d_core::encoding::{encode_scene, EncodeConfig, ModelWeights, WeightDims};
use d4d_core::geometry::CameraPose;
use d4d_core::lifting::{instance_embedding_table, lift_sequence, EncoderHandle, LiftOptions, PointCloud};
use d4d_core::octree::{build_and_aggregate, condense, voxel_stats, OctreeConfig, VoxelSet};
use d4d_core::pipeline::{run_pipeline, PipelineConfig};
use d4d_core::qa::{emit_dataset, QaConfig, WindowSpec};
use d4d_core::sim::{simulate, GroundTruth, SimConfig};
use d4d_core::{binio, eval, inspect, par, scene};

#[derive(Parser, Debug)]
#[command(name = "d4d", version, about = "Egocentric 4D scene encoding and dynamic-scene QA")]
struct Cli {
    /// Worker threads for data-parallel stages (default: all cores).
    #[arg(long, global = true, env = "D4D_THREADS")]
    threads: Option<usize>,

    /// More log output on stderr (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic RGB-D sequence with dense ground truth.
    Simulate(SimulateArgs),
    /// Lift a sequence into a timestamped feature point cloud.
    Lift(LiftArgs),
    /// Aggregate points into octree voxels.
    Compress(CompressArgs),
    /// Fuse voxels and camera poses into scene and camera tokens.
    Encode(EncodeArgs),
    /// Generate QA pairs from ground truth.
    Qagen(QagenArgs),
    /// Score predictions against a QA file.
    Eval(EvalArgs),
    /// Run every stage and write the full artifact tree.
    Pipeline(PipelineArgs),
    /// Print a summary of any artifact file.
    Inspect(InspectArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Scene config JSON; the built-in demo scene when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output sequence directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct LiftArgs {
    /// Sequence directory.
    #[arg(long)]
    seq: PathBuf,
    /// `mock` or `file:<path>` with precomputed features.
    #[arg(long, default_value = "mock")]
    encoder: String,
    #[arg(long, default_value_t = d4d_core::lifting::DEFAULT_D_VIS)]
    dvis: usize,
    #[arg(long, default_value_t = d4d_core::lifting::DEFAULT_D_INS)]
    dins: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Clamp the global/local blend similarity to [0, 1].
    #[arg(long)]
    clamp_similarity: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CompressArgs {
    #[arg(long)]
    points: PathBuf,
    /// Upper bound on leaf voxels.
    #[arg(long, default_value_t = d4d_core::octree::DEFAULT_TARGET_VOXELS)]
    target: usize,
    /// Also condense to at most this many voxels before writing.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EncodeArgs {
    #[arg(long)]
    voxels: PathBuf,
    /// Camera poses, one JSON object per line.
    #[arg(long)]
    poses: PathBuf,
    /// Weight file; when absent, weights are drawn from --seed.
    #[arg(long, conflicts_with = "seed")]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Camera tokens for seeded weights.
    #[arg(long, default_value_t = d4d_core::encoding::DEFAULT_M)]
    m: usize,
    #[arg(long, default_value_t = d4d_core::encoding::DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = d4d_core::octree::DEFAULT_BUDGET)]
    budget: usize,
    #[arg(long, default_value_t = d4d_core::encoding::DEFAULT_FUSE_CAP)]
    fuse_cap: usize,
    /// Write the weights used (handy with --seed).
    #[arg(long)]
    save_weights: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct QagenArgs {
    /// Ground-truth file written by `simulate`.
    #[arg(long)]
    gt: PathBuf,
    /// Momentary sampling rate, Hz.
    #[arg(long, default_value_t = d4d_core::qa::DEFAULT_QA_FPS)]
    fps: f64,
    /// Durative window length, seconds.
    #[arg(long, default_value_t = d4d_core::qa::DEFAULT_WINDOW)]
    window: f64,
    #[arg(long, default_value_t = d4d_core::qa::DEFAULT_STRIDE)]
    stride: f64,
    /// Minimum static dwell for temporarily-static objects, seconds.
    #[arg(long, default_value_t = d4d_core::qa::DEFAULT_DWELL)]
    dwell: f64,
    #[arg(long, default_value_t = 3)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write ground-truth answers in prediction format.
    #[arg(long)]
    answers: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    qa: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// Pipeline config JSON; defaults throughout when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    encoder: Option<String>,
    #[arg(long)]
    dvis: Option<usize>,
    #[arg(long)]
    target: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
    /// Overrides the scene seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct InspectArgs {
    file: PathBuf,
}

fn simulate_cmd(a: &SimulateArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => SimConfig::from_json_file(p)?,
        None => SimConfig::demo(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let out = simulate(&cfg)?;
    scene::save_sequence(&out.sequence, &a.out)?;
    out.truth.save_jsonl(&a.out.join("ground_truth.jsonl"))?;
    log::info!("wrote {} frames to {}", out.sequence.len(), a.out.display());
    Ok(())
}

fn lift_cmd(a: &LiftArgs) -> Result<()> {
    let seq = scene::load_sequence(&a.seq)?;
    let enc = EncoderHandle::parse(&a.encoder, a.dvis, a.seed)?;
    let table = instance_embedding_table(&seq.instance_ids(), a.dins, a.seed)?;
    let pc = lift_sequence(&seq, &enc, &table, LiftOptions { clamp_similarity: a.clamp_similarity })?;
    pc.save(&a.out)?;
    log::info!("lifted {} points with {}", pc.len(), enc.name());
    Ok(())
}

fn compress_cmd(a: &CompressArgs) -> Result<()> {
    let pc = PointCloud::load(&a.points)?;
    let mut grid = build_and_aggregate(&pc, &OctreeConfig { target_voxels: a.target, ..OctreeConfig::default() })?;
    if let Some(b) = a.budget {
        grid = condense(&grid, b)?;
    }
    let stats = voxel_stats(&grid);
    grid.voxels.save(&a.out)?;
    log::info!("{} points -> {} voxels at level {}", stats.points, stats.count, stats.depth);
    Ok(())
}

fn encode_cmd(a: &EncodeArgs) -> Result<()> {
    let set = VoxelSet::load(&a.voxels)?;
    let poses: Vec<CameraPose> = binio::read_jsonl(&a.poses)?;
    let weights = match &a.weights {
        Some(p) => ModelWeights::load(p)?,
        None => ModelWeights::init(a.seed, WeightDims::new(set.d_vis, set.d_ins, a.m)?)?,
    };
    if let Some(p) = &a.save_weights {
        weights.save(p)?;
    }
    let cfg = EncodeConfig { alpha: a.alpha, budget: a.budget, fuse_cap: a.fuse_cap };
    let tokens = encode_scene(&set, &poses, &weights, &cfg)?;
    tokens.save(&a.out)?;
    log::info!("{} scene tokens, {} camera tokens", tokens.scene.len(), tokens.camera.len());
    Ok(())
}

fn qagen_cmd(a: &QagenArgs) -> Result<()> {
    let gt = GroundTruth::load_jsonl(&a.gt)?;
    let cfg = QaConfig { qa_fps: a.fps, window: a.window, stride: a.stride, dwell: a.dwell, seed: a.seed };
    let duration = gt.times.last().copied().unwrap_or(0.0) - gt.times.first().copied().unwrap_or(0.0);
    let windows = WindowSpec::tile(duration, a.window, a.stride)?;
    let ds = emit_dataset(&gt, &windows, &cfg, None)?;
    binio::write_jsonl(&a.out, &ds.pairs)?;
    if let Some(p) = &a.answers {
        binio::write_jsonl(p, ds.answers())?;
    }
    log::info!("{} QA pairs, dynamic fraction {:.3}", ds.pairs.len(), ds.dynamic_fraction);
    Ok(())
}

fn eval_cmd(a: &EvalArgs) -> Result<()> {
    let report = eval::evaluate_files(&a.qa, &a.pred)?;
    report.save(&a.report, a.csv.as_deref())?;
    log::info!("{} questions, {} missing, {} malformed", report.total, report.missing, report.malformed);
    Ok(())
}

fn pipeline_cmd(a: &PipelineArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => PipelineConfig::from_json_file(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(e) = &a.encoder {
        cfg.encoder = e.clone();
    }
    if let Some(d) = a.dvis {
        cfg.d_vis = d;
    }
    if let Some(t) = a.target {
        cfg.octree_target = t;
    }
    if let Some(b) = a.budget {
        cfg.token_budget = b;
    }
    if let Some(s) = a.seed {
        cfg.sim.seed = s;
    }
    let out = run_pipeline(&cfg, &a.out)?;
    log::info!(
        "{} points, {} voxels, {} + {} tokens, {} QA pairs",
        out.summary.points,
        out.summary.voxels,
        out.summary.scene_tokens,
        out.summary.camera_tokens,
        out.summary.qa_pairs
    );
    Ok(())
}

fn inspect_cmd(path: &Path) -> Result<()> {
    let text = inspect::inspect_file(path)?;
    print!("{text}");
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate_cmd(a).context("simulate"),
        Command::Lift(a) => lift_cmd(a).context("lift"),
        Command::Compress(a) => compress_cmd(a).context("compress"),
        Command::Encode(a) => encode_cmd(a).context("encode"),
        Command::Qagen(a) => qagen_cmd(a).context("qagen"),
        Command::Eval(a) => eval_cmd(a).context("eval"),
        Command::Pipeline(a) => pipeline_cmd(a).context("pipeline"),
        Command::Inspect(a) => inspect_cmd(&a.file).with_context(|| format!("inspect {}", a.file.display())),
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .target(env_logger::Target::Stderr)
        .init();
    match cli.threads {
        Some(0) => bail!("--threads must be at least 1"),
        Some(n) => par::with_threads(n, || run(&cli)),
        None => run(&cli),
    }
}
