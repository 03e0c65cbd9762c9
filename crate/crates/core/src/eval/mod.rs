//! Scoring predictions against generated QA.
//!
//! Numeric answers use fixed tolerances: speed within 0.05 m/s, heading
//! within 0.5 rad (wrapped), distances and positions within 0.1 m, boxes with
//! 3D IoU above 0.1. Errors exactly at a tolerance count as correct. Set
//! answers score by F1, ordered answers by exact match, captions by corpus
//! BLEU-4.

mod bleu;
mod iou;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use bleu::{bleu4, corpus_bleu4, tokenize};
pub use iou::iou3d;

use crate::binio;
use crate::error::{Error, Result};
use crate::geometry::{angle_diff, distance, BBox3D};
use crate::qa::{Answer, Metric, QAPair, TaskKind, Unit};
use crate::sim::MOTION_THRESHOLD;

pub const SPEED_TOL: f64 = 0.05;
pub const DIRECTION_TOL: f64 = 0.5;
pub const DISTANCE_TOL: f64 = 0.1;
pub const POSITION_TOL: f64 = 0.1;
pub const IOU_MIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer: Option<Answer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_text: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumericKind {
    Speed,
    Direction,
    Distance,
    Position,
    Box,
}

fn type_error(pred: &Answer, gt: &Answer) -> Error {
    Error::Scoring(format!("cannot compare {} answer with {} answer", pred.type_name(), gt.type_name()))
}

/// Thresholded correctness of a numeric answer.
pub fn score_numeric(pred: &Answer, gt: &Answer, kind: NumericKind) -> Result<bool> {
    use Answer::*;
    match (kind, pred, gt) {
        (NumericKind::Speed, Scalar { value: p, unit: Unit::MetersPerSecond }, Scalar { value: g, unit: Unit::MetersPerSecond }) => {
            Ok((p - g).abs() <= SPEED_TOL)
        }
        (NumericKind::Direction, Scalar { value: p, unit: Unit::Radians }, Scalar { value: g, unit: Unit::Radians }) => {
            Ok(angle_diff(*p, *g) <= DIRECTION_TOL)
        }
        (NumericKind::Distance, Scalar { value: p, unit: Unit::Meters }, Scalar { value: g, unit: Unit::Meters }) => {
            Ok((p - g).abs() <= DISTANCE_TOL)
        }
        (NumericKind::Position, Vector { value: p, unit: Unit::Meters }, Vector { value: g, unit: Unit::Meters }) => {
            Ok(distance(*p, *g) <= POSITION_TOL)
        }
        (NumericKind::Box, Box { value: p }, Box { value: g }) => Ok(iou3d(p, g)? > IOU_MIN),
        _ => Err(type_error(pred, gt)),
    }
}

/// F1 of two id sets; 1 when both are empty.
pub fn f1_set(pred: &[u32], gt: &[u32]) -> f64 {
    let p: BTreeSet<u32> = pred.iter().copied().collect();
    let g: BTreeSet<u32> = gt.iter().copied().collect();
    if p.is_empty() && g.is_empty() {
        return 1.0;
    }
    let tp = p.intersection(&g).count() as f64;
    if tp == 0.0 {
        return 0.0;
    }
    let (prec, rec) = (tp / p.len() as f64, tp / g.len() as f64);
    2.0 * prec * rec / (prec + rec)
}

pub fn score_ordered<T: PartialEq>(pred: &[T], gt: &[T]) -> bool {
    pred == gt
}

fn norm_label(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Per-question score in [0, 1]. Captions return sentence BLEU here; the
/// task score is corpus BLEU.
pub fn score_answer(pred: &Answer, gt: &Answer) -> Result<f64> {
    use Answer::*;
    let b = |x: bool| if x { 1.0 } else { 0.0 };
    Ok(match (pred, gt) {
        (Scalar { unit: u, .. }, Scalar { unit: v, .. }) if u == v => {
            let kind = match v {
                Unit::MetersPerSecond => NumericKind::Speed,
                Unit::Radians => NumericKind::Direction,
                Unit::Meters => NumericKind::Distance,
            };
            b(score_numeric(pred, gt, kind)?)
        }
        (Vector { .. }, Vector { .. }) => b(score_numeric(pred, gt, NumericKind::Position)?),
        (Box { .. }, Box { .. }) => b(score_numeric(pred, gt, NumericKind::Box)?),
        (Motion { speed: ps, heading: ph }, Motion { speed: gs, heading: gh }) => {
            let speed_ok = (ps - gs).abs() <= SPEED_TOL;
            let heading_ok = *gs <= MOTION_THRESHOLD || angle_diff(*ph, *gh) <= DIRECTION_TOL;
            b(speed_ok && heading_ok)
        }
        (Label { value: p }, Label { value: g }) => b(norm_label(p) == norm_label(g)),
        (OrderedIds { value: p }, OrderedIds { value: g }) => b(score_ordered(p, g)),
        (OrderedLabels { value: p }, OrderedLabels { value: g }) => {
            let p: Vec<String> = p.iter().map(|s| norm_label(s)).collect();
            let g: Vec<String> = g.iter().map(|s| norm_label(s)).collect();
            b(score_ordered(&p, &g))
        }
        (IdSet { value: p }, IdSet { value: g }) => f1_set(p, g),
        (Id { value: p }, Id { value: g }) => b(p == g),
        (Text { value: p }, Text { value: g }) => bleu4(p, &[g]),
        _ => return Err(type_error(pred, gt)),
    })
}

fn numbers(text: &str) -> Vec<f64> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let flush = |cur: &mut String, out: &mut Vec<f64>| {
        if let Ok(v) = cur.parse::<f64>() {
            out.push(v);
        }
        cur.clear();
    };
    for c in text.chars() {
        let starts_number = c == '-' && cur.is_empty();
        if c.is_ascii_digit() || c == '.' || starts_number {
            cur.push(c);
        } else {
            flush(&mut cur, &mut out);
        }
    }
    flush(&mut cur, &mut out);
    out
}

fn integers(text: &str) -> Vec<u32> {
    text.split(|c: char| !c.is_ascii_digit())
        .filter(|s| !s.is_empty())
        .filter_map(|s| s.parse().ok())
        .collect()
}

/// Best-effort answer from free text, shaped like `expected`. Lossy: it takes
/// the first numbers, a bracketed id list, or the trimmed text.
pub fn parse_raw(text: &str, expected: &Answer) -> Option<Answer> {
    use Answer::*;
    let nums = numbers(text);
    let ids = || {
        let inner = match (text.find('['), text.find(']')) {
            (Some(a), Some(b)) if a < b => &text[a + 1..b],
            _ => text,
        };
        integers(inner)
    };
    Some(match expected {
        Scalar { unit, .. } => Scalar { value: *nums.first()?, unit: *unit },
        Vector { unit, .. } => Vector { value: [*nums.first()?, *nums.get(1)?, *nums.get(2)?], unit: *unit },
        Motion { .. } => Motion { speed: *nums.first()?, heading: *nums.get(1)? },
        Box { .. } => {
            if nums.len() < 7 {
                return None;
            }
            Box { value: BBox3D::new([nums[0], nums[1], nums[2]], [nums[3] / 2.0, nums[4] / 2.0, nums[5] / 2.0], nums[6]) }
        }
        Label { .. } => Label { value: text.trim().trim_end_matches('.').to_string() },
        Text { .. } => Text { value: text.to_string() },
        Id { .. } => Id { value: *integers(text).first()? },
        OrderedIds { .. } => OrderedIds { value: ids() },
        IdSet { .. } => {
            let mut v = ids();
            v.sort_unstable();
            v.dedup();
            IdSet { value: v }
        }
        OrderedLabels { .. } => OrderedLabels {
            value: text
                .split(|c| c == ',' || c == ';')
                .flat_map(|s| s.split(" then "))
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty() && s != "none")
                .collect(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskReport {
    pub task: TaskKind,
    pub metric: Metric,
    pub count: usize,
    /// Predictions present (structured or parsed from text).
    pub answered: usize,
    /// Wrong answer type or unparseable text.
    pub malformed: usize,
    /// Accuracy in percent, mean F1, or corpus BLEU-4.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub tasks: Vec<TaskReport>,
    pub total: usize,
    pub missing: usize,
    pub malformed: usize,
    pub parsed_from_text: usize,
    /// Corpus BLEU-4 over the text rendering of every answer.
    pub overall_bleu4: f64,
}

impl EvalReport {
    pub fn task(&self, t: TaskKind) -> Option<&TaskReport> {
        self.tasks.iter().find(|r| r.task == t)
    }

    /// Accuracy 100, F1 1 and BLEU 1 on every task present.
    pub fn is_perfect(&self) -> bool {
        self.overall_bleu4 == 1.0
            && self.tasks.iter().all(|r| match r.metric {
                Metric::Accuracy => r.score == 100.0,
                _ => r.score == 1.0,
            })
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("task,metric,count,answered,malformed,score\n");
        for r in &self.tasks {
            let m = match r.metric {
                Metric::Accuracy => "acc%",
                Metric::F1 => "f1",
                Metric::Bleu4 => "bleu4",
            };
            let _ = writeln!(s, "{},{m},{},{},{},{:.4}", r.task, r.count, r.answered, r.malformed, r.score);
        }
        let _ = writeln!(s, "overall,bleu4,{},{},{},{:.4}", self.total, self.total - self.missing, self.malformed, self.overall_bleu4);
        s
    }

    pub fn save(&self, json: &Path, csv: Option<&Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json("eval report", e))?;
        binio::write_file(json, format!("{text}\n").as_bytes())?;
        if let Some(csv) = csv {
            binio::write_file(csv, self.to_csv().as_bytes())?;
        }
        Ok(())
    }
}

struct Scored {
    answer: Option<Answer>,
    parsed: bool,
    malformed: bool,
    score: f64,
}

fn score_one(qa: &QAPair, pred: Option<&Prediction>) -> Scored {
    let mut parsed = false;
    let answer = pred.and_then(|p| match (&p.answer, &p.raw_text) {
        (Some(a), _) => Some(a.clone()),
        (None, Some(t)) => {
            parsed = true;
            parse_raw(t, &qa.answer)
        }
        (None, None) => None,
    });
    let (score, malformed) = match &answer {
        Some(a) => match score_answer(a, &qa.answer) {
            Ok(s) => (s, false),
            Err(_) => (0.0, true),
        },
        None => (0.0, parsed),
    };
    Scored { answer, parsed, malformed, score }
}

/// Scores predictions against the QA list; missing predictions score zero.
pub fn evaluate_run(qa: &[QAPair], preds: &[Prediction]) -> Result<EvalReport> {
    let known: HashMap<&str, usize> = qa.iter().enumerate().map(|(i, q)| (q.id.as_str(), i)).collect();
    if known.len() != qa.len() {
        return Err(Error::Scoring("duplicate ids in QA file".into()));
    }
    let mut by_id: HashMap<&str, &Prediction> = HashMap::new();
    for p in preds {
        if !known.contains_key(p.id.as_str()) {
            return Err(Error::Scoring(format!("prediction id {:?} is not in the QA file", p.id)));
        }
        if by_id.insert(p.id.as_str(), p).is_some() {
            return Err(Error::Scoring(format!("duplicate prediction id {:?}", p.id)));
        }
    }
    let scored: Vec<Scored> = crate::par::map(qa, |q| score_one(q, by_id.get(q.id.as_str()).copied()));

    let mut groups: BTreeMap<TaskKind, Vec<usize>> = BTreeMap::new();
    for (i, q) in qa.iter().enumerate() {
        groups.entry(q.task).or_default().push(i);
    }
    let mut tasks = Vec::new();
    for (task, idx) in groups {
        let count = idx.len();
        let answered = idx.iter().filter(|&&i| scored[i].answer.is_some()).count();
        let malformed = idx.iter().filter(|&&i| scored[i].malformed).count();
        let score = match task.metric() {
            Metric::Accuracy => 100.0 * idx.iter().map(|&i| scored[i].score).sum::<f64>() / count as f64,
            Metric::F1 => idx.iter().map(|&i| scored[i].score).sum::<f64>() / count as f64,
            Metric::Bleu4 => {
                let segs: Vec<(String, Vec<String>)> = idx
                    .iter()
                    .map(|&i| {
                        let cand = match &scored[i].answer {
                            Some(Answer::Text { value }) => value.clone(),
                            _ => String::new(),
                        };
                        (cand, vec![qa[i].answer.to_text()])
                    })
                    .collect();
                corpus_bleu4(&segs)
            }
        };
        tasks.push(TaskReport { task, metric: task.metric(), count, answered, malformed, score });
    }
    let segs: Vec<(String, Vec<String>)> = qa
        .iter()
        .zip(&scored)
        .map(|(q, s)| (s.answer.as_ref().map(Answer::to_text).unwrap_or_default(), vec![q.answer.to_text()]))
        .collect();
    Ok(EvalReport {
        tasks,
        total: qa.len(),
        missing: scored.iter().filter(|s| s.answer.is_none() && !s.parsed).count(),
        malformed: scored.iter().filter(|s| s.malformed).count(),
        parsed_from_text: scored.iter().filter(|s| s.parsed).count(),
        overall_bleu4: corpus_bleu4(&segs),
    })
}

pub fn load_predictions(path: &Path) -> Result<Vec<Prediction>> {
    binio::read_jsonl(path)
}

pub fn evaluate_files(qa: &Path, preds: &Path) -> Result<EvalReport> {
    evaluate_run(&crate::qa::load_qa(qa)?, &load_predictions(preds)?)
}

#[cfg(test)]
mod tests;
