//! Question-answer generation from simulator ground truth.
//!
//! Two passes mirror how the benchmark is built: momentary questions at
//! sampled frames and durative questions over sliding windows, plus object
//! captions at each window start. Every answer comes with a chain of thought
//! whose arithmetic can be replayed ([`cot::verify_pair`]).

pub mod cot;
mod durative;
mod momentary;
mod phrase;
mod types;

use std::collections::BTreeMap;
use std::path::Path;

use serde::Serialize;

pub use durative::window_frames;
pub use types::{Anchors, Answer, Metric, QAPair, TaskKind, Unit, WindowSpec};

use crate::binio;
use crate::error::{Error, Result};
use crate::eval::Prediction;
use crate::geometry::{distance, wrap_angle, BBox3D, Vec3};
use crate::scene::project;
use crate::sim::GroundTruth;

use cot::{Calc, CotStep};
use durative::Durative;

pub const DEFAULT_QA_FPS: f64 = 5.0;
pub const DEFAULT_WINDOW: f64 = 10.0;
pub const DEFAULT_STRIDE: f64 = 5.0;
pub const DEFAULT_DWELL: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QaConfig {
    pub qa_fps: f64,
    pub window: f64,
    pub stride: f64,
    pub dwell: f64,
    pub seed: u64,
}

impl Default for QaConfig {
    fn default() -> Self {
        QaConfig {
            qa_fps: DEFAULT_QA_FPS,
            window: DEFAULT_WINDOW,
            stride: DEFAULT_STRIDE,
            dwell: DEFAULT_DWELL,
            seed: 3,
        }
    }
}

impl QaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.qa_fps > 0.0) || !(self.window > 0.0) || !(self.stride > 0.0) || !(self.dwell >= 0.0) {
            return Err(Error::Config(format!("invalid QA config {self:?}")));
        }
        Ok(())
    }

    /// Ground-truth frames between momentary samples.
    pub fn frame_stride(&self, gt_fps: f64) -> usize {
        ((gt_fps / self.qa_fps).round() as usize).max(1)
    }
}

/// Kinematics of one entity at one frame.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntityState {
    pub id: u32,
    pub position: Vec3,
    pub velocity: Vec3,
    pub speed: f64,
    pub heading: f64,
    /// Center projects inside the ego image.
    pub in_view: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrameProperties {
    pub frame: usize,
    pub t: f64,
    /// Objects then agents, each in id order.
    pub entities: Vec<EntityState>,
    /// `(a, b, distance)` for every unordered pair, `a < b`.
    pub distances: Vec<(u32, u32, f64)>,
    /// `(a, b, bearing)`: direction of b in a's facing frame, for `a != b`.
    pub bearings: Vec<(u32, u32, f64)>,
}

pub fn frame_level_properties(gt: &GroundTruth, t: f64) -> Result<FrameProperties> {
    let i = gt.frame_at(t)?;
    let ids: Vec<u32> = gt.objects.iter().map(|o| o.id).chain(gt.agents.iter().map(|a| a.id)).collect();
    let pose = gt.camera[i];
    let mut entities = Vec::with_capacity(ids.len());
    for &id in &ids {
        let p = gt.properties_at(id, i)?;
        let in_view = project(p.position, &gt.intrinsics, &pose)?.is_visible();
        entities.push(EntityState {
            id,
            position: p.position,
            velocity: p.velocity,
            speed: p.speed,
            heading: p.heading,
            in_view,
        });
    }
    let mut distances = Vec::new();
    let mut bearings = Vec::new();
    for (x, a) in entities.iter().enumerate() {
        let yaw = gt.yaw_track(a.id)?[i];
        for (y, b) in entities.iter().enumerate() {
            if x == y {
                continue;
            }
            if a.id < b.id {
                distances.push((a.id, b.id, distance(a.position, b.position)));
            }
            let d = crate::geometry::sub(b.position, a.position);
            bearings.push((a.id, b.id, wrap_angle(d[1].atan2(d[0]) - yaw)));
        }
    }
    distances.sort_by(|p, q| (p.0, p.1).cmp(&(q.0, q.1)));
    Ok(FrameProperties { frame: i, t: gt.times[i], entities, distances, bearings })
}

/// Momentary questions at frame `i`; `sample` is the sample ordinal.
pub fn gen_momentary(gt: &GroundTruth, i: usize, sample: usize, seed: u64) -> Result<Vec<QAPair>> {
    if i >= gt.len() {
        return Err(Error::NotFound(format!("frame {i} outside sequence of {}", gt.len())));
    }
    let mut out = Vec::new();
    out.extend(momentary::dynamic_scene(gt, i, seed)?);
    out.extend(momentary::relative_position(gt, i, seed)?);
    out.extend(momentary::current_object_property(gt, i, sample, seed)?);
    out.push(momentary::agent_velocity(gt, i, seed)?);
    out.extend(momentary::multi_agent_relation(gt, i, seed)?);
    Ok(out)
}

/// Durative questions over one window; `key` is the window ordinal.
pub fn gen_durative(gt: &GroundTruth, w: &WindowSpec, key: usize, cfg: &QaConfig) -> Result<Vec<QAPair>> {
    let d = Durative::new(gt, *w, cfg.seed, cfg.dwell, key)?;
    let mut out = Vec::new();
    out.extend(d.motion_sequence()?);
    out.extend(d.most_active()?);
    out.extend(d.temporary_static()?);
    out.push(d.agent_trajectory()?);
    out.push(d.agent_motion_status()?);
    out.extend(d.agent_grab()?);
    Ok(out)
}

/// Template caption of object `id` at the frame nearest `t`.
pub fn gen_caption(gt: &GroundTruth, t: f64, id: u32) -> Result<QAPair> {
    let i = gt.frame_at(t)?;
    let o = gt
        .object(id)
        .ok_or_else(|| Error::NotFound(format!("no object with id {id}")))?;
    let t = gt.times[i];
    let b = BBox3D::new(o.centers[i], o.half_extents, o.yaws[i]);
    let mut cot = vec![CotStep::calc("box given in the question", Calc::BoxAt { id, frame: i, result: b })];
    let color = cot::color_name(o.color);
    cot.push(CotStep::calc(format!("surface color reads as {color}"), Calc::ColorName { rgb: o.color, result: color.clone() }));
    let size = cot::size_class(o.half_extents);
    cot.push(CotStep::calc(
        format!("largest dimension {:.2} m: {size}", 2.0 * o.half_extents.iter().copied().fold(0.0, f64::max)),
        Calc::SizeClass { half_extents: o.half_extents, result: size.clone() },
    ));
    let (mut ids, mut dists) = (Vec::new(), Vec::new());
    for other in gt.objects.iter().filter(|x| x.id != id) {
        let d = distance(b.center, other.centers[i]);
        cot.push(CotStep::calc(
            format!("distance to {} (#{}) is {d:.2} m", other.label, other.id),
            Calc::Distance { a: b.center, b: other.centers[i], result: d },
        ));
        ids.push(other.id);
        dists.push(d);
    }
    let neighbor = match cot::argmin(&ids, &dists) {
        Some(n) => {
            let d = dists[ids.iter().position(|&x| x == n).unwrap()];
            cot.push(CotStep::calc(format!("nearest is #{n}"), Calc::Argmin { ids: ids.clone(), values: dists, result: n }));
            Some((gt.label_of(n), d))
        }
        None => None,
    };
    let speed = gt.properties_at(id, i)?.speed;
    cot.push(CotStep::calc(format!("speed {speed:.3} m/s"), Calc::SpeedSeries { id, frames: vec![i], result: vec![speed] }));
    let moving = cot::is_moving(speed);
    cot.push(CotStep::calc(if moving { "moving" } else { "static" }, Calc::IsMoving { speed, result: moving }));
    let text = cot::caption(&color, &size, &o.label, neighbor.as_ref(), moving);
    cot.push(CotStep::calc(
        "compose the description",
        Calc::Caption { color, size, label: o.label.clone(), neighbor, moving, result: text.clone() },
    ));
    let mut anchor_ids = vec![id];
    anchor_ids.extend(ids);
    Ok(QAPair {
        id: String::new(),
        task: TaskKind::ObjectCaptioning,
        question: phrase::caption(t, &o.label, id, &b),
        answer: Answer::Text { value: text },
        cot,
        anchors: Anchors { sequence_id: gt.sequence_id.clone(), times: vec![t], ids: anchor_ids },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QaDataset {
    pub pairs: Vec<QAPair>,
    pub counts: BTreeMap<TaskKind, usize>,
    /// Fraction of frames with at least one moving object.
    pub dynamic_fraction: f64,
}

impl QaDataset {
    pub fn answers(&self) -> Vec<Prediction> {
        self.pairs
            .iter()
            .map(|p| Prediction { id: p.id.clone(), answer: Some(p.answer.clone()), raw_text: None })
            .collect()
    }

    /// Writes the QA file and the matching ground-truth answer file.
    pub fn save(&self, qa: &Path, answers: &Path) -> Result<()> {
        binio::write_jsonl(qa, &self.pairs)?;
        binio::write_jsonl(answers, self.answers())
    }
}

/// Optional per-pair text rewrite applied after ids are assigned.
pub type RewriteHook<'a> = &'a (dyn Fn(&mut QAPair) + Sync);

fn cmp_pairs(a: &QAPair, b: &QAPair) -> std::cmp::Ordering {
    a.task
        .cmp(&b.task)
        .then_with(|| {
            let ta = a.anchors.times.first().copied().unwrap_or(0.0);
            let tb = b.anchors.times.first().copied().unwrap_or(0.0);
            ta.total_cmp(&tb)
        })
        .then_with(|| a.anchors.ids.cmp(&b.anchors.ids))
}

pub fn emit_dataset(gt: &GroundTruth, windows: &[WindowSpec], cfg: &QaConfig, hook: Option<RewriteHook<'_>>) -> Result<QaDataset> {
    cfg.validate()?;
    if gt.is_empty() {
        return Err(Error::Empty("ground truth has no frames".into()));
    }
    let k = cfg.frame_stride(gt.fps);
    let samples: Vec<usize> = (0..gt.len()).step_by(k).collect();
    let per_frame = crate::par::try_map_range(samples.len(), |s| gen_momentary(gt, samples[s], s, cfg.seed))?;
    let per_window = crate::par::try_map_range(windows.len(), |w| {
        let mut v = gen_durative(gt, &windows[w], w, cfg)?;
        for o in &gt.objects {
            v.push(gen_caption(gt, windows[w].start, o.id)?);
        }
        Ok::<_, Error>(v)
    })?;
    let mut pairs: Vec<QAPair> = per_frame.into_iter().flatten().chain(per_window.into_iter().flatten()).collect();
    pairs.sort_by(cmp_pairs);
    let mut counts: BTreeMap<TaskKind, usize> = BTreeMap::new();
    for p in &mut pairs {
        let n = counts.entry(p.task).or_insert(0);
        p.id = format!("{}-{}-{:05}", gt.sequence_id, p.task, *n);
        *n += 1;
        if let Some(h) = hook {
            h(p);
        }
    }
    Ok(QaDataset { pairs, counts, dynamic_fraction: gt.dynamic_frame_fraction() })
}

pub fn load_qa(path: &Path) -> Result<Vec<QAPair>> {
    binio::read_jsonl(path)
}

/// Per-task counts of a QA list.
pub fn task_histogram(pairs: &[QAPair]) -> BTreeMap<TaskKind, usize> {
    let mut h = BTreeMap::new();
    for p in pairs {
        *h.entry(p.task).or_insert(0) += 1;
    }
    h
}
