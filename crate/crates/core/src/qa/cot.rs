//! Chain-of-thought steps with machine-checkable arithmetic.
//!
//! Each step may carry a [`Calc`]: an operation, its operands and the stored
//! result. [`Calc::replay`] recomputes the result with the same rule the
//! generator used and requires bit equality. Fact steps (`position`, `box_at`,
//! series lookups) are checked against ground truth when it is supplied.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geometry::{distance, norm, scale, sub, BBox3D, Vec3};
use crate::sim::{GroundTruth, MOTION_THRESHOLD};

use super::types::{Answer, QAPair};

/// Lateral or longitudinal offsets within this band are not reported.
pub const DEAD_BAND: f64 = 0.2;
/// Center distance at or below which two things are "near".
pub const NEAR_DISTANCE: f64 = 1.5;
/// Range-rate magnitude (m/s) separating approaching/receding from static.
pub const RANGE_RATE_THRESHOLD: f64 = 0.05;
/// Yaw rate (rad/s) above which an agent counts as turning.
pub const TURN_RATE_THRESHOLD: f64 = 0.3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotStep {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calc: Option<Calc>,
}

impl CotStep {
    pub fn note(text: impl Into<String>) -> Self {
        CotStep { text: text.into(), calc: None }
    }

    pub fn calc(text: impl Into<String>, calc: Calc) -> Self {
        CotStep { text: text.into(), calc: Some(calc) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionValue {
    pub speed: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Calc {
    Position { id: u32, frame: usize, result: Vec3 },
    BoxAt { id: u32, frame: usize, result: BBox3D },
    Yaw { id: u32, frame: usize, result: f64 },
    Track { id: u32, frames: Vec<usize>, result: Vec<Vec3> },
    SpeedSeries { id: u32, frames: Vec<usize>, result: Vec<f64> },
    YawRateSeries { id: u32, frames: Vec<usize>, result: Vec<f64> },
    Velocity { a: Vec3, b: Vec3, dt: f64, result: Vec3 },
    Norm { v: Vec3, result: f64 },
    Polar { v: Vec3, result: MotionValue },
    Distance { a: Vec3, b: Vec3, result: f64 },
    EgoFrame { a: Vec3, b: Vec3, yaw: f64, result: [f64; 2] },
    RelativeLabel { right: f64, forward: f64, distance: f64, result: String },
    RangeRate { d0: f64, d1: f64, dt: f64, result: f64 },
    Relation { rate: f64, result: String },
    IsMoving { speed: f64, result: bool },
    Select { ids: Vec<u32>, flags: Vec<bool>, result: Vec<u32> },
    PathLength { points: Vec<Vec3>, result: f64 },
    Argmax { ids: Vec<u32>, values: Vec<f64>, result: u32 },
    Argmin { ids: Vec<u32>, values: Vec<f64>, result: u32 },
    Onset { times: Vec<f64>, speeds: Vec<f64>, result: Option<f64> },
    SortBy { ids: Vec<u32>, keys: Vec<f64>, result: Vec<u32> },
    TemporaryStatic { times: Vec<f64>, speeds: Vec<f64>, dwell: f64, result: bool },
    Compass { a: Vec3, b: Vec3, dt: f64, result: Option<String> },
    Status { speed: f64, yaw_rate: f64, result: String },
    Collapse { labels: Vec<Option<String>>, result: Vec<String> },
    Earliest { ids: Vec<u32>, times: Vec<f64>, result: u32 },
    SizeClass { half_extents: Vec3, result: String },
    ColorName { rgb: [u8; 3], result: String },
    Caption { color: String, size: String, label: String, neighbor: Option<(String, f64)>, moving: bool, result: String },
}

// ---- rules shared by the generator and replay ----

pub fn velocity(a: Vec3, b: Vec3, dt: f64) -> Vec3 {
    scale(sub(b, a), 1.0 / dt)
}

pub fn polar(v: Vec3) -> MotionValue {
    MotionValue { speed: norm(v), heading: v[1].atan2(v[0]) }
}

/// `[right, forward]` offset of `b` from `a` for a viewer facing `yaw`.
pub fn ego_frame(a: Vec3, b: Vec3, yaw: f64) -> [f64; 2] {
    let d = sub(b, a);
    let (s, c) = yaw.sin_cos();
    [s * d[0] - c * d[1], c * d[0] + s * d[1]]
}

pub fn relative_label(right: f64, forward: f64, dist: f64) -> String {
    let along = if forward > DEAD_BAND {
        Some("front")
    } else if forward < -DEAD_BAND {
        Some("behind")
    } else {
        None
    };
    let side = if right > DEAD_BAND {
        Some("right")
    } else if right < -DEAD_BAND {
        Some("left")
    } else {
        None
    };
    let dir = match (along, side) {
        (Some(a), Some(s)) => format!("{a}-{s}"),
        (Some(a), None) => a.to_string(),
        (None, Some(s)) => s.to_string(),
        (None, None) => "aligned".to_string(),
    };
    let range = if dist <= NEAR_DISTANCE { "near" } else { "far" };
    format!("{dir}, {range}")
}

pub fn relation(rate: f64) -> String {
    if rate < -RANGE_RATE_THRESHOLD {
        "approaching"
    } else if rate > RANGE_RATE_THRESHOLD {
        "receding"
    } else {
        "static"
    }
    .to_string()
}

pub fn is_moving(speed: f64) -> bool {
    speed > MOTION_THRESHOLD
}

pub fn path_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| distance(w[0], w[1])).sum()
}

/// Index-aligned `ids`/`values`; ties go to the smaller id.
pub fn argmax(ids: &[u32], values: &[f64]) -> Option<u32> {
    ids.iter()
        .zip(values)
        .fold(None, |best: Option<(u32, f64)>, (&id, &v)| match best {
            Some((bi, bv)) if bv > v || (bv == v && bi < id) => Some((bi, bv)),
            _ => Some((id, v)),
        })
        .map(|b| b.0)
}

pub fn argmin(ids: &[u32], values: &[f64]) -> Option<u32> {
    let neg: Vec<f64> = values.iter().map(|v| -v).collect();
    argmax(ids, &neg)
}

/// First sample whose speed and the next sample's speed both exceed the
/// motion threshold.
pub fn onset(times: &[f64], speeds: &[f64]) -> Option<f64> {
    (0..speeds.len().saturating_sub(1))
        .find(|&j| is_moving(speeds[j]) && is_moving(speeds[j + 1]))
        .map(|j| times[j])
}

/// Ascending by key, ties by id.
pub fn sort_by_key(ids: &[u32], keys: &[f64]) -> Vec<u32> {
    let mut pairs: Vec<(f64, u32)> = keys.iter().copied().zip(ids.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    pairs.into_iter().map(|p| p.1).collect()
}

/// Moving, then static for at least `dwell` seconds (first static sample to
/// first moving sample after it), then moving again.
pub fn temporary_static(times: &[f64], speeds: &[f64], dwell: f64) -> bool {
    let moving: Vec<bool> = speeds.iter().map(|&s| is_moving(s)).collect();
    let mut j = 0;
    while j < moving.len() {
        if moving[j] {
            j += 1;
            continue;
        }
        let start = j;
        while j < moving.len() && !moving[j] {
            j += 1;
        }
        if start > 0 && j < moving.len() && times[j] - times[start] >= dwell {
            return true;
        }
    }
    false
}

pub fn compass(a: Vec3, b: Vec3, dt: f64) -> Option<String> {
    let v = velocity(a, b, dt);
    let planar = (v[0] * v[0] + v[1] * v[1]).sqrt();
    if !is_moving(planar) {
        return None;
    }
    let h = v[1].atan2(v[0]);
    let q = std::f64::consts::FRAC_PI_4;
    let label = if h > -q && h <= q {
        "east"
    } else if h > q && h <= 3.0 * q {
        "north"
    } else if h > -3.0 * q && h <= -q {
        "south"
    } else {
        "west"
    };
    Some(label.to_string())
}

pub fn status(speed: f64, yaw_rate: f64) -> String {
    if yaw_rate.abs() > TURN_RATE_THRESHOLD {
        "turning"
    } else if is_moving(speed) {
        "walking"
    } else {
        "stationary"
    }
    .to_string()
}

/// Drops gaps and merges consecutive repeats.
pub fn collapse(labels: &[Option<String>]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for l in labels.iter().flatten() {
        if out.last() != Some(l) {
            out.push(l.clone());
        }
    }
    out
}

pub fn earliest(ids: &[u32], times: &[f64]) -> Option<u32> {
    argmin(ids, times)
}

pub fn size_class(half_extents: Vec3) -> String {
    let full = 2.0 * half_extents.iter().copied().fold(0.0, f64::max);
    if full < 0.3 {
        "small"
    } else if full < 1.0 {
        "medium"
    } else {
        "large"
    }
    .to_string()
}

const PALETTE: [(&str, [u8; 3]); 11] = [
    ("black", [0, 0, 0]),
    ("gray", [128, 128, 128]),
    ("white", [255, 255, 255]),
    ("red", [220, 30, 30]),
    ("green", [30, 160, 60]),
    ("blue", [30, 60, 220]),
    ("yellow", [230, 210, 40]),
    ("orange", [240, 140, 20]),
    ("purple", [130, 50, 170]),
    ("brown", [139, 90, 43]),
    ("pink", [240, 150, 190]),
];

/// Nearest palette entry in RGB.
pub fn color_name(rgb: [u8; 3]) -> String {
    let d2 = |c: [u8; 3]| -> i32 { (0..3).map(|k| (rgb[k] as i32 - c[k] as i32).pow(2)).sum() };
    PALETTE
        .iter()
        .min_by_key(|(_, c)| d2(*c))
        .map(|(n, _)| n.to_string())
        .unwrap_or_default()
}

pub fn caption(color: &str, size: &str, label: &str, neighbor: Option<&(String, f64)>, moving: bool) -> String {
    let state = if moving { "moving" } else { "static" };
    match neighbor {
        Some((n, d)) => format!("a {color} {size} {label}, {d:.1} m from the {n}, currently {state}."),
        None => format!("a {color} {size} {label}, alone in the scene, currently {state}."),
    }
}

fn mismatch(op: &str) -> Error {
    Error::Scoring(format!("cot step {op} does not reproduce its stored result"))
}

fn check<T: PartialEq>(ok: T, stored: &T, op: &str) -> Result<()> {
    if &ok == stored {
        Ok(())
    } else {
        Err(mismatch(op))
    }
}

fn series(gt: &GroundTruth, id: u32, frames: &[usize], f: impl Fn(usize) -> Result<f64>) -> Result<Vec<f64>> {
    gt.track(id)?;
    frames.iter().map(|&i| f(i)).collect()
}

impl Calc {
    pub fn name(&self) -> &'static str {
        match self {
            Calc::Position { .. } => "position",
            Calc::BoxAt { .. } => "box_at",
            Calc::Yaw { .. } => "yaw",
            Calc::Track { .. } => "track",
            Calc::SpeedSeries { .. } => "speed_series",
            Calc::YawRateSeries { .. } => "yaw_rate_series",
            Calc::Velocity { .. } => "velocity",
            Calc::Norm { .. } => "norm",
            Calc::Polar { .. } => "polar",
            Calc::Distance { .. } => "distance",
            Calc::EgoFrame { .. } => "ego_frame",
            Calc::RelativeLabel { .. } => "relative_label",
            Calc::RangeRate { .. } => "range_rate",
            Calc::Relation { .. } => "relation",
            Calc::IsMoving { .. } => "is_moving",
            Calc::Select { .. } => "select",
            Calc::PathLength { .. } => "path_length",
            Calc::Argmax { .. } => "argmax",
            Calc::Argmin { .. } => "argmin",
            Calc::Onset { .. } => "onset",
            Calc::SortBy { .. } => "sort_by",
            Calc::TemporaryStatic { .. } => "temporary_static",
            Calc::Compass { .. } => "compass",
            Calc::Status { .. } => "status",
            Calc::Collapse { .. } => "collapse",
            Calc::Earliest { .. } => "earliest",
            Calc::SizeClass { .. } => "size_class",
            Calc::ColorName { .. } => "color_name",
            Calc::Caption { .. } => "caption",
        }
    }

    /// Recomputes the step; fact steps are checked only when `gt` is given.
    pub fn replay(&self, gt: Option<&GroundTruth>) -> Result<()> {
        let op = self.name();
        match self {
            Calc::Position { id, frame, result } => {
                if let Some(gt) = gt {
                    let p = gt.track(*id)?.get(*frame).copied().ok_or_else(|| mismatch(op))?;
                    check(p, result, op)?;
                }
            }
            Calc::BoxAt { id, frame, result } => {
                if let Some(gt) = gt {
                    let o = gt.object(*id).ok_or_else(|| mismatch(op))?;
                    let b = BBox3D::new(o.centers[*frame], o.half_extents, o.yaws[*frame]);
                    check(b, result, op)?;
                }
            }
            Calc::Yaw { id, frame, result } => {
                if let Some(gt) = gt {
                    let y = gt.yaw_track(*id)?.get(*frame).copied().ok_or_else(|| mismatch(op))?;
                    check(y, result, op)?;
                }
            }
            Calc::Track { id, frames, result } => {
                if let Some(gt) = gt {
                    let tr = gt.track(*id)?;
                    let pts: Option<Vec<Vec3>> = frames.iter().map(|&i| tr.get(i).copied()).collect();
                    check(pts.ok_or_else(|| mismatch(op))?, result, op)?;
                }
            }
            Calc::SpeedSeries { id, frames, result } => {
                if let Some(gt) = gt {
                    let s = series(gt, *id, frames, |i| Ok(gt.properties_at(*id, i)?.speed))?;
                    check(s, result, op)?;
                }
            }
            Calc::YawRateSeries { id, frames, result } => {
                if let Some(gt) = gt {
                    check(series(gt, *id, frames, |i| gt.yaw_rate_at(*id, i))?, result, op)?;
                }
            }
            Calc::Velocity { a, b, dt, result } => check(velocity(*a, *b, *dt), result, op)?,
            Calc::Norm { v, result } => check(norm(*v), result, op)?,
            Calc::Polar { v, result } => check(polar(*v), result, op)?,
            Calc::Distance { a, b, result } => check(distance(*a, *b), result, op)?,
            Calc::EgoFrame { a, b, yaw, result } => check(ego_frame(*a, *b, *yaw), result, op)?,
            Calc::RelativeLabel { right, forward, distance, result } => {
                check(relative_label(*right, *forward, *distance), result, op)?
            }
            Calc::RangeRate { d0, d1, dt, result } => check((d1 - d0) / dt, result, op)?,
            Calc::Relation { rate, result } => check(relation(*rate), result, op)?,
            Calc::IsMoving { speed, result } => check(is_moving(*speed), result, op)?,
            Calc::Select { ids, flags, result } => {
                if ids.len() != flags.len() {
                    return Err(mismatch(op));
                }
                let sel: Vec<u32> = ids.iter().zip(flags).filter(|p| *p.1).map(|p| *p.0).collect();
                check(sel, result, op)?
            }
            Calc::PathLength { points, result } => check(path_length(points), result, op)?,
            Calc::Argmax { ids, values, result } => check(argmax(ids, values), &Some(*result), op)?,
            Calc::Argmin { ids, values, result } => check(argmin(ids, values), &Some(*result), op)?,
            Calc::Onset { times, speeds, result } => check(onset(times, speeds), result, op)?,
            Calc::SortBy { ids, keys, result } => check(sort_by_key(ids, keys), result, op)?,
            Calc::TemporaryStatic { times, speeds, dwell, result } => {
                check(temporary_static(times, speeds, *dwell), result, op)?
            }
            Calc::Compass { a, b, dt, result } => check(compass(*a, *b, *dt), result, op)?,
            Calc::Status { speed, yaw_rate, result } => check(status(*speed, *yaw_rate), result, op)?,
            Calc::Collapse { labels, result } => check(collapse(labels), result, op)?,
            Calc::Earliest { ids, times, result } => check(earliest(ids, times), &Some(*result), op)?,
            Calc::SizeClass { half_extents, result } => check(size_class(*half_extents), result, op)?,
            Calc::ColorName { rgb, result } => check(color_name(*rgb), result, op)?,
            Calc::Caption { color, size, label, neighbor, moving, result } => {
                check(caption(color, size, label, neighbor.as_ref(), *moving), result, op)?
            }
        }
        Ok(())
    }

    /// Stored result as JSON, for comparison with an answer payload.
    pub fn result_value(&self) -> Value {
        let v = match self {
            Calc::Position { result, .. } => serde_json::to_value(result),
            Calc::BoxAt { result, .. } => serde_json::to_value(result),
            Calc::Track { result, .. } => serde_json::to_value(result),
            Calc::Velocity { result, .. } => serde_json::to_value(result),
            Calc::Polar { result, .. } => serde_json::to_value(result),
            Calc::EgoFrame { result, .. } => serde_json::to_value(result),
            Calc::Yaw { result, .. }
            | Calc::Norm { result, .. }
            | Calc::Distance { result, .. }
            | Calc::RangeRate { result, .. }
            | Calc::PathLength { result, .. } => serde_json::to_value(result),
            Calc::SpeedSeries { result, .. } | Calc::YawRateSeries { result, .. } => serde_json::to_value(result),
            Calc::RelativeLabel { result, .. }
            | Calc::Relation { result, .. }
            | Calc::Status { result, .. }
            | Calc::SizeClass { result, .. }
            | Calc::ColorName { result, .. }
            | Calc::Caption { result, .. } => serde_json::to_value(result),
            Calc::IsMoving { result, .. } | Calc::TemporaryStatic { result, .. } => serde_json::to_value(result),
            Calc::Select { result, .. } | Calc::SortBy { result, .. } => serde_json::to_value(result),
            Calc::Argmax { result, .. } | Calc::Argmin { result, .. } | Calc::Earliest { result, .. } => {
                serde_json::to_value(result)
            }
            Calc::Onset { result, .. } => serde_json::to_value(result),
            Calc::Compass { result, .. } => serde_json::to_value(result),
            Calc::Collapse { result, .. } => serde_json::to_value(result),
        };
        v.unwrap_or(Value::Null)
    }
}

/// The part of an answer that the final chain step must reproduce.
pub fn answer_payload(a: &Answer) -> Value {
    let v = match a {
        Answer::Scalar { value, .. } => serde_json::to_value(value),
        Answer::Vector { value, .. } => serde_json::to_value(value),
        Answer::Label { value } | Answer::Text { value } => serde_json::to_value(value),
        Answer::OrderedIds { value } | Answer::IdSet { value } => serde_json::to_value(value),
        Answer::OrderedLabels { value } => serde_json::to_value(value),
        Answer::Id { value } => serde_json::to_value(value),
        Answer::Motion { speed, heading } => serde_json::to_value(MotionValue { speed: *speed, heading: *heading }),
        Answer::Box { value } => serde_json::to_value(value),
    };
    v.unwrap_or(Value::Null)
}

/// Replays every step and checks the last computed result equals the answer.
pub fn verify_pair(pair: &QAPair, gt: Option<&GroundTruth>) -> Result<()> {
    for step in &pair.cot {
        if let Some(c) = &step.calc {
            c.replay(gt).map_err(|e| Error::Scoring(format!("{}: {e}", pair.id)))?;
        }
    }
    let last = pair
        .cot
        .iter()
        .rev()
        .find_map(|s| s.calc.as_ref())
        .ok_or_else(|| Error::Scoring(format!("{}: chain has no computed step", pair.id)))?;
    if last.result_value() != answer_payload(&pair.answer) {
        return Err(Error::Scoring(format!(
            "{}: final step {} does not equal the answer",
            pair.id,
            last.name()
        )));
    }
    Ok(())
}
