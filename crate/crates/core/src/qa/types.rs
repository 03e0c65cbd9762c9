use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox3D, Vec3};

use super::cot::CotStep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskKind {
    ObjectCaptioning,
    DynamicScene,
    RelativePosition,
    CurrentObjectProperty,
    AgentVelocity,
    MultiAgentRelation,
    TemporaryStaticObjects,
    MostActiveObject,
    MotionSequence,
    AgentTrajectory,
    AgentMotionStatus,
    AgentGrabObject,
}

impl TaskKind {
    pub const ALL: [TaskKind; 12] = [
        TaskKind::ObjectCaptioning,
        TaskKind::DynamicScene,
        TaskKind::RelativePosition,
        TaskKind::CurrentObjectProperty,
        TaskKind::AgentVelocity,
        TaskKind::MultiAgentRelation,
        TaskKind::TemporaryStaticObjects,
        TaskKind::MostActiveObject,
        TaskKind::MotionSequence,
        TaskKind::AgentTrajectory,
        TaskKind::AgentMotionStatus,
        TaskKind::AgentGrabObject,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::ObjectCaptioning => "object-captioning",
            TaskKind::DynamicScene => "dynamic-scene",
            TaskKind::RelativePosition => "relative-position",
            TaskKind::CurrentObjectProperty => "current-object-property",
            TaskKind::AgentVelocity => "agent-velocity",
            TaskKind::MultiAgentRelation => "multi-agent-relation",
            TaskKind::TemporaryStaticObjects => "temporary-static-objects",
            TaskKind::MostActiveObject => "most-active-object",
            TaskKind::MotionSequence => "motion-sequence",
            TaskKind::AgentTrajectory => "agent-trajectory",
            TaskKind::AgentMotionStatus => "agent-motion-status",
            TaskKind::AgentGrabObject => "agent-grab-object",
        }
    }

    /// Metric family used when scoring this task.
    pub fn metric(self) -> Metric {
        match self {
            TaskKind::ObjectCaptioning => Metric::Bleu4,
            TaskKind::DynamicScene | TaskKind::TemporaryStaticObjects => Metric::F1,
            _ => Metric::Accuracy,
        }
    }

    pub fn is_momentary(self) -> bool {
        matches!(
            self,
            TaskKind::DynamicScene
                | TaskKind::RelativePosition
                | TaskKind::CurrentObjectProperty
                | TaskKind::AgentVelocity
                | TaskKind::MultiAgentRelation
        )
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| Error::NotFound(format!("unknown task {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    F1,
    Bleu4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Unit {
    #[serde(rename = "m/s")]
    MetersPerSecond,
    #[serde(rename = "m")]
    Meters,
    #[serde(rename = "rad")]
    Radians,
}

impl Unit {
    pub fn symbol(self) -> &'static str {
        match self {
            Unit::MetersPerSecond => "m/s",
            Unit::Meters => "m",
            Unit::Radians => "rad",
        }
    }
}

/// Structured answer; also the prediction format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Answer {
    Scalar { value: f64, unit: Unit },
    Vector { value: Vec3, unit: Unit },
    Label { value: String },
    OrderedIds { value: Vec<u32> },
    OrderedLabels { value: Vec<String> },
    /// Sorted ascending, distinct.
    IdSet { value: Vec<u32> },
    Id { value: u32 },
    /// Speed in m/s and heading in rad.
    Motion { speed: f64, heading: f64 },
    Box { value: BBox3D },
    Text { value: String },
}

impl Answer {
    pub fn type_name(&self) -> &'static str {
        match self {
            Answer::Scalar { .. } => "scalar",
            Answer::Vector { .. } => "vector",
            Answer::Label { .. } => "label",
            Answer::OrderedIds { .. } => "ordered_ids",
            Answer::OrderedLabels { .. } => "ordered_labels",
            Answer::IdSet { .. } => "id_set",
            Answer::Id { .. } => "id",
            Answer::Motion { .. } => "motion",
            Answer::Box { .. } => "box",
            Answer::Text { .. } => "text",
        }
    }

    /// Plain-text rendering, used for the overall BLEU score.
    pub fn to_text(&self) -> String {
        let ids = |v: &[u32]| v.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ");
        match self {
            Answer::Scalar { value, unit } => format!("{value:.2} {}", unit.symbol()),
            Answer::Vector { value, unit } => {
                format!("{:.2} {:.2} {:.2} {}", value[0], value[1], value[2], unit.symbol())
            }
            Answer::Label { value } | Answer::Text { value } => value.clone(),
            Answer::OrderedIds { value } | Answer::IdSet { value } => {
                if value.is_empty() {
                    "none".into()
                } else {
                    ids(value)
                }
            }
            Answer::OrderedLabels { value } => {
                if value.is_empty() {
                    "none".into()
                } else {
                    value.join(" then ")
                }
            }
            Answer::Id { value } => value.to_string(),
            Answer::Motion { speed, heading } => format!("{speed:.2} m/s heading {heading:.2} rad"),
            Answer::Box { value } => format!(
                "center {:.2} {:.2} {:.2} size {:.2} {:.2} {:.2} yaw {:.2}",
                value.center[0],
                value.center[1],
                value.center[2],
                2.0 * value.half_extents[0],
                2.0 * value.half_extents[1],
                2.0 * value.half_extents[2],
                value.yaw
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchors {
    pub sequence_id: String,
    /// Question time, or window start and end.
    pub times: Vec<f64>,
    pub ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QAPair {
    pub id: String,
    pub task: TaskKind,
    pub question: String,
    pub answer: Answer,
    pub cot: Vec<CotStep>,
    pub anchors: Anchors,
}

/// Closed time interval `[start, end]` used for durative questions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub start: f64,
    pub end: f64,
    pub stride: f64,
}

impl WindowSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.end > self.start) || !(self.stride > 0.0) {
            return Err(Error::Config(format!(
                "window needs end > start and stride > 0, got {self:?}"
            )));
        }
        Ok(())
    }

    /// Windows of length `len` every `stride` seconds over `[0, duration]`;
    /// a single `[0, duration]` window if the sequence is shorter than `len`.
    pub fn tile(duration: f64, len: f64, stride: f64) -> Result<Vec<WindowSpec>> {
        if !(len > 0.0) || !(stride > 0.0) {
            return Err(Error::Config("window length and stride must be > 0".into()));
        }
        if !(duration > 0.0) {
            return Ok(Vec::new());
        }
        if duration < len {
            return Ok(vec![WindowSpec { start: 0.0, end: duration, stride }]);
        }
        let mut out = Vec::new();
        let mut k = 0u32;
        loop {
            let s = k as f64 * stride;
            if s + len > duration + 1e-9 {
                break;
            }
            out.push(WindowSpec { start: s, end: s + len, stride });
            k += 1;
        }
        Ok(out)
    }
}
