//! Window questions: ordering, activity, dwell and agent behavior.

use crate::error::{Error, Result};
use crate::sim::GroundTruth;

use super::cot::{self, Calc, CotStep};
use super::momentary::fmt3;
use super::phrase;
use super::types::{Anchors, Answer, QAPair, TaskKind, WindowSpec};

/// Frames whose timestamps fall inside the window.
pub fn window_frames(gt: &GroundTruth, w: &WindowSpec) -> Result<Vec<usize>> {
    w.validate()?;
    let frames: Vec<usize> = (0..gt.len())
        .filter(|&i| gt.times[i] >= w.start - 1e-9 && gt.times[i] <= w.end + 1e-9)
        .collect();
    if frames.is_empty() {
        return Err(Error::Degenerate(format!("window [{}, {}] contains no samples", w.start, w.end)));
    }
    Ok(frames)
}

/// Every `step`-th window frame, always keeping the last one.
fn coarse(frames: &[usize], step: usize) -> Vec<usize> {
    let mut out: Vec<usize> = frames.iter().copied().step_by(step.max(1)).collect();
    if out.last() != frames.last() {
        out.push(*frames.last().unwrap());
    }
    out
}

fn pair(gt: &GroundTruth, w: &WindowSpec, task: TaskKind, question: String, answer: Answer, cot: Vec<CotStep>, ids: Vec<u32>) -> QAPair {
    QAPair {
        id: String::new(),
        task,
        question,
        answer,
        cot,
        anchors: Anchors {
            sequence_id: gt.sequence_id.clone(),
            times: vec![w.start, w.end],
            ids,
        },
    }
}

fn speeds(gt: &GroundTruth, id: u32, frames: &[usize]) -> Result<Vec<f64>> {
    frames.iter().map(|&i| Ok(gt.properties_at(id, i)?.speed)).collect()
}

fn fmt_series(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.2}")).collect();
    format!("[{}]", parts.join(", "))
}

pub(crate) struct Durative<'a> {
    pub gt: &'a GroundTruth,
    pub w: WindowSpec,
    pub frames: Vec<usize>,
    pub times: Vec<f64>,
    pub seed: u64,
    pub dwell: f64,
    pub key: usize,
}

impl<'a> Durative<'a> {
    pub fn new(gt: &'a GroundTruth, w: WindowSpec, seed: u64, dwell: f64, key: usize) -> Result<Self> {
        let frames = window_frames(gt, &w)?;
        let times = frames.iter().map(|&i| gt.times[i]).collect();
        Ok(Durative { gt, w, frames, times, seed, dwell, key })
    }

    fn speed_step(&self, id: u32, cot: &mut Vec<CotStep>) -> Result<Vec<f64>> {
        let s = speeds(self.gt, id, &self.frames)?;
        cot.push(CotStep::calc(
            format!("{} (#{id}) speeds over the window: {}", self.gt.label_of(id), fmt_series(&s)),
            Calc::SpeedSeries { id, frames: self.frames.clone(), result: s.clone() },
        ));
        Ok(s)
    }

    pub fn motion_sequence(&self) -> Result<Option<QAPair>> {
        let mut cot = Vec::new();
        let (mut ids, mut keys) = (Vec::new(), Vec::new());
        for o in &self.gt.objects {
            let s = self.speed_step(o.id, &mut cot)?;
            let on = cot::onset(&self.times, &s);
            cot.push(CotStep::calc(
                match on {
                    Some(t) => format!("{} starts moving at t={t:.1}s", o.label),
                    None => format!("{} never moves for two samples in a row", o.label),
                },
                Calc::Onset { times: self.times.clone(), speeds: s, result: on },
            ));
            if let Some(t) = on {
                ids.push(o.id);
                keys.push(t);
            }
        }
        if ids.is_empty() {
            return Ok(None);
        }
        let order = cot::sort_by_key(&ids, &keys);
        cot.push(CotStep::calc(
            format!("ordered by onset time: {order:?}"),
            Calc::SortBy { ids: ids.clone(), keys, result: order.clone() },
        ));
        let q = phrase::motion_sequence(self.seed, self.key, &self.w);
        Ok(Some(pair(self.gt, &self.w, TaskKind::MotionSequence, q, Answer::OrderedIds { value: order }, cot, ids)))
    }

    pub fn most_active(&self) -> Result<Option<QAPair>> {
        let mut cot = Vec::new();
        let (mut ids, mut lens) = (Vec::new(), Vec::new());
        for o in &self.gt.objects {
            let pts: Vec<[f64; 3]> = self.frames.iter().map(|&i| o.centers[i]).collect();
            cot.push(CotStep::calc(
                format!("{} (#{}) positions from {} to {}", o.label, o.id, fmt3(pts[0]), fmt3(pts[pts.len() - 1])),
                Calc::Track { id: o.id, frames: self.frames.clone(), result: pts.clone() },
            ));
            let l = cot::path_length(&pts);
            cot.push(CotStep::calc(format!("path length {l:.3} m"), Calc::PathLength { points: pts, result: l }));
            ids.push(o.id);
            lens.push(l);
        }
        if !lens.iter().any(|&l| l > 1e-9) {
            return Ok(None);
        }
        let best = cot::argmax(&ids, &lens).expect("non-empty");
        cot.push(CotStep::calc(
            format!("longest path: #{best} ({})", self.gt.label_of(best)),
            Calc::Argmax { ids: ids.clone(), values: lens, result: best },
        ));
        let q = phrase::most_active(self.seed, self.key, &self.w);
        Ok(Some(pair(self.gt, &self.w, TaskKind::MostActiveObject, q, Answer::Id { value: best }, cot, ids)))
    }

    pub fn temporary_static(&self) -> Result<Option<QAPair>> {
        if self.gt.objects.is_empty() {
            return Ok(None);
        }
        let mut cot = Vec::new();
        let (mut ids, mut flags) = (Vec::new(), Vec::new());
        for o in &self.gt.objects {
            let s = self.speed_step(o.id, &mut cot)?;
            let f = cot::temporary_static(&self.times, &s, self.dwell);
            cot.push(CotStep::calc(
                format!("{} moves, rests >= {:.1}s, then moves again: {f}", o.label, self.dwell),
                Calc::TemporaryStatic { times: self.times.clone(), speeds: s, dwell: self.dwell, result: f },
            ));
            ids.push(o.id);
            flags.push(f);
        }
        let set: Vec<u32> = ids.iter().zip(&flags).filter(|p| *p.1).map(|p| *p.0).collect();
        cot.push(CotStep::calc(format!("selected: {set:?}"), Calc::Select { ids: ids.clone(), flags, result: set.clone() }));
        let q = phrase::temporary_static(self.seed, self.key, &self.w, self.dwell);
        Ok(Some(pair(self.gt, &self.w, TaskKind::TemporaryStaticObjects, q, Answer::IdSet { value: set }, cot, ids)))
    }

    fn second_frames(&self) -> Vec<usize> {
        coarse(&self.frames, self.gt.fps.round().max(1.0) as usize)
    }

    pub fn agent_trajectory(&self) -> Result<QAPair> {
        let ego = self.gt.ego();
        let frames = self.second_frames();
        let pts: Vec<[f64; 3]> = frames.iter().map(|&i| ego.positions[i]).collect();
        let mut cot = vec![CotStep::calc(
            format!("wearer positions sampled each second: {} .. {}", fmt3(pts[0]), fmt3(pts[pts.len() - 1])),
            Calc::Track { id: ego.id, frames: frames.clone(), result: pts.clone() },
        )];
        let mut labels = Vec::new();
        for k in 1..frames.len() {
            let dt = self.gt.times[frames[k]] - self.gt.times[frames[k - 1]];
            let l = cot::compass(pts[k - 1], pts[k], dt);
            cot.push(CotStep::calc(
                format!(
                    "{:.1}s-{:.1}s: {}",
                    self.gt.times[frames[k - 1]],
                    self.gt.times[frames[k]],
                    l.as_deref().unwrap_or("no planar motion")
                ),
                Calc::Compass { a: pts[k - 1], b: pts[k], dt, result: l.clone() },
            ));
            labels.push(l);
        }
        let summary = cot::collapse(&labels);
        cot.push(CotStep::calc(format!("merged: {}", summary.join(" then ")), Calc::Collapse { labels, result: summary.clone() }));
        let q = phrase::agent_trajectory(self.seed, self.key, &self.w);
        Ok(pair(self.gt, &self.w, TaskKind::AgentTrajectory, q, Answer::OrderedLabels { value: summary }, cot, vec![ego.id]))
    }

    pub fn agent_motion_status(&self) -> Result<QAPair> {
        let ego = self.gt.ego();
        let frames = self.second_frames();
        let s = speeds(self.gt, ego.id, &frames)?;
        let r: Vec<f64> = frames.iter().map(|&i| self.gt.yaw_rate_at(ego.id, i)).collect::<Result<_>>()?;
        let mut cot = vec![
            CotStep::calc(format!("wearer speed each second: {}", fmt_series(&s)), Calc::SpeedSeries { id: ego.id, frames: frames.clone(), result: s.clone() }),
            CotStep::calc(format!("wearer yaw rate each second: {}", fmt_series(&r)), Calc::YawRateSeries { id: ego.id, frames: frames.clone(), result: r.clone() }),
        ];
        let mut labels = Vec::new();
        for k in 0..frames.len() {
            let st = cot::status(s[k], r[k]);
            cot.push(CotStep::calc(format!("t={:.1}s: {st}", self.gt.times[frames[k]]), Calc::Status { speed: s[k], yaw_rate: r[k], result: st.clone() }));
            labels.push(Some(st));
        }
        let summary = cot::collapse(&labels);
        cot.push(CotStep::calc(format!("timeline: {}", summary.join(" then ")), Calc::Collapse { labels, result: summary.clone() }));
        let q = phrase::agent_motion_status(self.seed, self.key, &self.w);
        Ok(pair(self.gt, &self.w, TaskKind::AgentMotionStatus, q, Answer::OrderedLabels { value: summary }, cot, vec![ego.id]))
    }

    pub fn agent_grab(&self) -> Result<Vec<QAPair>> {
        let mut out = Vec::new();
        for agent in &self.gt.agents {
            let grabs: Vec<_> = self
                .gt
                .grabs
                .iter()
                .filter(|g| g.agent == agent.id && g.start >= self.w.start - 1e-9 && g.start <= self.w.end + 1e-9)
                .collect();
            if grabs.is_empty() {
                continue;
            }
            let mut cot: Vec<CotStep> = grabs
                .iter()
                .map(|g| CotStep::note(format!("grab of {} (#{}) begins at t={:.2}s", self.gt.label_of(g.object), g.object, g.start)))
                .collect();
            let ids: Vec<u32> = grabs.iter().map(|g| g.object).collect();
            let times: Vec<f64> = grabs.iter().map(|g| g.start).collect();
            let first = cot::earliest(&ids, &times).expect("non-empty");
            let t_first = grabs.iter().filter(|g| g.object == first).map(|g| g.start).fold(f64::INFINITY, f64::min);
            cot.push(CotStep::calc(
                format!("first object taken: #{first} at t={t_first:.2}s"),
                Calc::Earliest { ids, times, result: first },
            ));
            let who = self.gt.label_of(agent.id);
            let q = phrase::agent_grab(self.seed, self.key, &self.w, &who, agent.id);
            let mut p = pair(self.gt, &self.w, TaskKind::AgentGrabObject, q, Answer::Id { value: first }, cot, vec![agent.id, first]);
            p.anchors.times.push(t_first);
            out.push(p);
        }
        Ok(out)
    }
}
