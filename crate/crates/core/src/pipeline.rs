//! End-to-end driver: simulate, lift, compress, encode, generate QA and score
//! the ground-truth answers against themselves.
//!
//! Everything written is a pure function of the config, so two runs with the
//! same config produce byte-identical trees. The summary holds counts only.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::binio;
use crate::encoding::{encode_scene, EncodeConfig, ModelWeights, WeightDims, DEFAULT_ALPHA, DEFAULT_FUSE_CAP, DEFAULT_M};
use crate::error::{Error, Result};
use crate::eval::{evaluate_run, EvalReport};
use crate::lifting::{instance_embedding_table, lift_sequence, EncoderHandle, LiftOptions, DEFAULT_D_INS, DEFAULT_D_VIS};
use crate::octree::{build_and_aggregate, voxel_stats, OctreeConfig, DEFAULT_BUDGET, DEFAULT_TARGET_VOXELS};
use crate::qa::{emit_dataset, QaConfig, TaskKind, WindowSpec, DEFAULT_DWELL, DEFAULT_QA_FPS, DEFAULT_STRIDE, DEFAULT_WINDOW};
use crate::scene::save_sequence;
use crate::sim::{simulate, SimConfig};

fn default_d_vis() -> usize {
    DEFAULT_D_VIS
}
fn default_d_ins() -> usize {
    DEFAULT_D_INS
}
fn default_m() -> usize {
    DEFAULT_M
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}
fn default_fps() -> f64 {
    DEFAULT_QA_FPS
}
fn default_target() -> usize {
    DEFAULT_TARGET_VOXELS
}
fn default_budget() -> usize {
    DEFAULT_BUDGET
}
fn default_fuse_cap() -> usize {
    DEFAULT_FUSE_CAP
}
fn default_window() -> f64 {
    DEFAULT_WINDOW
}
fn default_stride() -> f64 {
    DEFAULT_STRIDE
}
fn default_dwell() -> f64 {
    DEFAULT_DWELL
}
fn default_encoder() -> String {
    "mock".into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct Seeds {
    pub lift: u64,
    pub weights: u64,
    pub qa: u64,
}

impl Default for Seeds {
    fn default() -> Self {
        Seeds { lift: 7, weights: 7, qa: 3 }
    }
}

/// Pipeline settings. Every field has a default, so `{}` is a valid config
/// and runs the built-in demo scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "SimConfig::demo")]
    pub sim: SimConfig,
    #[serde(default = "default_encoder")]
    pub encoder: String,
    #[serde(default = "default_d_vis")]
    pub d_vis: usize,
    #[serde(default = "default_d_ins")]
    pub d_ins: usize,
    #[serde(default = "default_m")]
    pub m: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// QA sampling rate, Hz.
    #[serde(default = "default_fps")]
    pub fps: f64,
    #[serde(default = "default_target")]
    pub octree_target: usize,
    #[serde(default = "default_budget")]
    pub token_budget: usize,
    #[serde(default = "default_fuse_cap")]
    pub fuse_cap: usize,
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_stride")]
    pub stride: f64,
    #[serde(default = "default_dwell")]
    pub dwell: f64,
    #[serde(default)]
    pub clamp_similarity: bool,
    #[serde(default)]
    pub seeds: Seeds,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl PipelineConfig {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("d_vis", self.d_vis),
            ("d_ins", self.d_ins),
            ("m", self.m),
            ("octree_target", self.octree_target),
            ("token_budget", self.token_budget),
            ("fuse_cap", self.fuse_cap),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.d_vis % 2 != 0 {
            return Err(Error::Config(format!("d_vis must be even, got {}", self.d_vis)));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        self.sim.validate()?;
        self.qa().validate()
    }

    pub fn qa(&self) -> QaConfig {
        QaConfig {
            qa_fps: self.fps,
            window: self.window,
            stride: self.stride,
            dwell: self.dwell,
            seed: self.seeds.qa,
        }
    }

    pub fn encode(&self) -> EncodeConfig {
        EncodeConfig { alpha: self.alpha, budget: self.token_budget, fuse_cap: self.fuse_cap }
    }
}

/// File names inside the output directory.
pub mod files {
    pub const CONFIG: &str = "config.json";
    pub const SEQUENCE: &str = "seq";
    pub const GROUND_TRUTH: &str = "seq/ground_truth.jsonl";
    pub const POINTS: &str = "points.d4dp";
    pub const VOXELS: &str = "voxels.d4dv";
    pub const WEIGHTS: &str = "weights.d4dw";
    pub const TOKENS: &str = "tokens.d4dt";
    pub const QA: &str = "qa.jsonl";
    pub const ANSWERS: &str = "qa_answers.jsonl";
    pub const REPORT: &str = "report.json";
    pub const REPORT_CSV: &str = "report.csv";
    pub const SUMMARY: &str = "summary.json";
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub sequence_id: String,
    pub frames: usize,
    pub encoder: String,
    pub points: usize,
    pub voxels: usize,
    pub voxel_level: u8,
    pub scene_tokens: usize,
    pub camera_tokens: usize,
    pub d_vis: usize,
    pub qa_pairs: usize,
    pub qa_counts: BTreeMap<TaskKind, usize>,
    pub dynamic_fraction: f64,
    pub self_eval_perfect: bool,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub dir: PathBuf,
    pub summary: Summary,
    pub report: EvalReport,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| Error::Stage { stage: name, source: Box::new(e) })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path.display().to_string(), e))?;
    binio::write_file(path, format!("{text}\n").as_bytes())
}

/// Runs every stage and writes the artifact tree under `out`.
pub fn run_pipeline(cfg: &PipelineConfig, out: &Path) -> Result<PipelineOutput> {
    stage("config", cfg.validate())?;
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    write_json(&out.join(files::CONFIG), cfg)?;

    let sim = stage("simulate", simulate(&cfg.sim))?;
    stage("simulate", save_sequence(&sim.sequence, &out.join(files::SEQUENCE)))?;
    stage("simulate", sim.truth.save_jsonl(&out.join(files::GROUND_TRUTH)))?;
    log::info!("simulate: {} frames", sim.sequence.len());

    let points = stage("lift", (|| {
        let enc = EncoderHandle::parse(&cfg.encoder, cfg.d_vis, cfg.seeds.lift)?;
        let table = instance_embedding_table(&sim.sequence.instance_ids(), cfg.d_ins, cfg.seeds.lift)?;
        let opts = LiftOptions { clamp_similarity: cfg.clamp_similarity };
        let pc = lift_sequence(&sim.sequence, &enc, &table, opts)?;
        pc.save(&out.join(files::POINTS))?;
        Ok((pc, enc.name()))
    })())?;
    let (points, encoder) = points;
    log::info!("lift: {} points", points.len());

    let grid = stage("compress", (|| {
        let grid = build_and_aggregate(&points, &OctreeConfig { target_voxels: cfg.octree_target, ..OctreeConfig::default() })?;
        grid.voxels.save(&out.join(files::VOXELS))?;
        Ok(grid)
    })())?;
    let stats = voxel_stats(&grid);
    log::info!("compress: {} voxels at level {}", stats.count, stats.depth);

    let tokens = stage("encode", (|| {
        let weights = ModelWeights::init(cfg.seeds.weights, WeightDims::new(cfg.d_vis, cfg.d_ins, cfg.m)?)?;
        weights.save(&out.join(files::WEIGHTS))?;
        let t = encode_scene(&grid.voxels, &sim.sequence.poses, &weights, &cfg.encode())?;
        t.save(&out.join(files::TOKENS))?;
        Ok(t)
    })())?;
    log::info!("encode: {} scene + {} camera tokens", tokens.scene.len(), tokens.camera.len());

    let qa = stage("qagen", (|| {
        let windows = WindowSpec::tile(cfg.sim.duration, cfg.window, cfg.stride)?;
        let ds = emit_dataset(&sim.truth, &windows, &cfg.qa(), None)?;
        ds.save(&out.join(files::QA), &out.join(files::ANSWERS))?;
        Ok(ds)
    })())?;
    log::info!("qagen: {} pairs", qa.pairs.len());

    let report = stage("eval", (|| {
        let r = evaluate_run(&qa.pairs, &qa.answers())?;
        r.save(&out.join(files::REPORT), Some(&out.join(files::REPORT_CSV)))?;
        Ok(r)
    })())?;

    let summary = Summary {
        sequence_id: sim.truth.sequence_id.clone(),
        frames: sim.sequence.len(),
        encoder,
        points: points.len(),
        voxels: stats.count,
        voxel_level: stats.depth,
        scene_tokens: tokens.scene.len(),
        camera_tokens: tokens.camera.len(),
        d_vis: tokens.d_vis,
        qa_pairs: qa.pairs.len(),
        qa_counts: qa.counts.clone(),
        dynamic_fraction: qa.dynamic_fraction,
        self_eval_perfect: report.is_perfect(),
    };
    write_json(&out.join(files::SUMMARY), &summary)?;
    if !summary.self_eval_perfect {
        return Err(Error::Stage {
            stage: "eval",
            source: Box::new(Error::Scoring("ground-truth answers did not score perfectly".into())),
        });
    }
    Ok(PipelineOutput { dir: out.to_path_buf(), summary, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_json_is_the_demo_with_defaults() {
        let c = PipelineConfig::default();
        assert_eq!(c.sim, SimConfig::demo());
        assert_eq!((c.d_vis, c.d_ins, c.m, c.token_budget), (64, 8, 8, 1024));
        assert_eq!(c.alpha, 0.5);
        assert_eq!(c.fps, 5.0);
        c.validate().unwrap();
    }

    #[test]
    fn odd_d_vis_is_rejected() {
        let c = PipelineConfig { d_vis: 63, ..PipelineConfig::default() };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let c = PipelineConfig { encoder: "file:/nonexistent/features.d4df".into(), ..PipelineConfig::default() };
        let dir = tempfile::tempdir().unwrap();
        let err = run_pipeline(&c, dir.path()).unwrap_err().to_string();
        assert!(err.starts_with("lift stage failed"), "{err}");
        assert!(err.contains("/nonexistent/features.d4df"), "{err}");
    }
}
