//! Dense ground truth sampled at the simulation frame rate.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio;
use crate::error::{Error, Result};
use crate::geometry::{norm, scale, sub, wrap_angle, Aabb, CameraPose, Vec3};
use crate::scene::Intrinsics;

/// Speed above which something counts as moving, m/s. Shared with the speed
/// tolerance used for scoring.
pub const MOTION_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTrack {
    pub id: u32,
    pub label: String,
    pub color: [u8; 3],
    pub half_extents: Vec3,
    pub centers: Vec<Vec3>,
    pub yaws: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentTrack {
    pub id: u32,
    pub ego: bool,
    pub height: f64,
    pub positions: Vec<Vec3>,
    pub yaws: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrabEvent {
    pub agent: u32,
    pub object: u32,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub sequence_id: String,
    pub fps: f64,
    pub intrinsics: Intrinsics,
    pub room: Aabb,
    pub times: Vec<f64>,
    pub objects: Vec<ObjectTrack>,
    /// The ego agent is first.
    pub agents: Vec<AgentTrack>,
    pub grabs: Vec<GrabEvent>,
    /// Ego camera pose per frame.
    pub camera: Vec<CameraPose>,
    /// Per frame, sorted `(agent, object)` pairs currently held.
    pub grabbed: Vec<Vec<(u32, u32)>>,
}

/// Instantaneous kinematics of one tracked entity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Properties {
    pub position: Vec3,
    pub velocity: Vec3,
    pub speed: f64,
    pub heading: f64,
    pub is_moving: bool,
}

/// Central difference of `xs` at frame `i`; one-sided at the ends.
pub(crate) fn central_diff(xs: &[Vec3], times: &[f64], i: usize) -> Vec3 {
    let n = xs.len();
    if n < 2 {
        return [0.0; 3];
    }
    let (a, b) = if i == 0 {
        (0, 1)
    } else if i == n - 1 {
        (n - 2, n - 1)
    } else {
        (i - 1, i + 1)
    };
    scale(sub(xs[b], xs[a]), 1.0 / (times[b] - times[a]))
}

impl GroundTruth {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn ego(&self) -> &AgentTrack {
        &self.agents[0]
    }

    pub fn object(&self, id: u32) -> Option<&ObjectTrack> {
        self.objects.iter().find(|o| o.id == id)
    }

    pub fn agent(&self, id: u32) -> Option<&AgentTrack> {
        self.agents.iter().find(|a| a.id == id)
    }

    pub fn label_of(&self, id: u32) -> String {
        if let Some(o) = self.object(id) {
            o.label.clone()
        } else if let Some(a) = self.agent(id) {
            if a.ego { "camera wearer".into() } else { "person".into() }
        } else {
            format!("#{id}")
        }
    }

    /// Positions of an object (box centers) or agent (head positions).
    pub fn track(&self, id: u32) -> Result<&[Vec3]> {
        if let Some(o) = self.object(id) {
            Ok(&o.centers)
        } else if let Some(a) = self.agent(id) {
            Ok(&a.positions)
        } else {
            Err(Error::NotFound(format!("no object or agent with id {id}")))
        }
    }

    pub fn yaw_track(&self, id: u32) -> Result<&[f64]> {
        if let Some(o) = self.object(id) {
            Ok(&o.yaws)
        } else if let Some(a) = self.agent(id) {
            Ok(&a.yaws)
        } else {
            Err(Error::NotFound(format!("no object or agent with id {id}")))
        }
    }

    /// Frame index for a timestamp; accepts anything within half a frame.
    pub fn frame_at(&self, t: f64) -> Result<usize> {
        let n = self.times.len();
        if n == 0 {
            return Err(Error::NotFound("ground truth has no frames".into()));
        }
        let k = self.times.partition_point(|&x| x < t);
        let best = [k.saturating_sub(1), k.min(n - 1)]
            .into_iter()
            .min_by(|&a, &b| (self.times[a] - t).abs().total_cmp(&(self.times[b] - t).abs()))
            .unwrap();
        if (self.times[best] - t).abs() > 0.5 / self.fps + 1e-9 {
            return Err(Error::NotFound(format!("t={t} outside sequence")));
        }
        Ok(best)
    }

    pub fn velocity_at(&self, id: u32, i: usize) -> Result<Vec3> {
        Ok(central_diff(self.track(id)?, &self.times, i))
    }

    pub fn properties_at(&self, id: u32, i: usize) -> Result<Properties> {
        let track = self.track(id)?;
        if i >= track.len() {
            return Err(Error::NotFound(format!("frame {i} out of range")));
        }
        let v = central_diff(track, &self.times, i);
        let speed = norm(v);
        Ok(Properties {
            position: track[i],
            velocity: v,
            speed,
            heading: v[1].atan2(v[0]),
            is_moving: speed > MOTION_THRESHOLD,
        })
    }

    /// Yaw rate (rad/s) by central difference of wrapped yaw increments.
    pub fn yaw_rate_at(&self, id: u32, i: usize) -> Result<f64> {
        let yaws = self.yaw_track(id)?;
        let n = yaws.len();
        if n < 2 {
            return Ok(0.0);
        }
        let (a, b) = if i == 0 {
            (0, 1)
        } else if i == n - 1 {
            (n - 2, n - 1)
        } else {
            (i - 1, i + 1)
        };
        Ok(wrap_angle(yaws[b] - yaws[a]) / (self.times[b] - self.times[a]))
    }

    /// Fraction of frames in which at least one object is moving.
    pub fn dynamic_frame_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let dynamic = (0..self.len())
            .filter(|&i| {
                self.objects
                    .iter()
                    .any(|o| norm(central_diff(&o.centers, &self.times, i)) > MOTION_THRESHOLD)
            })
            .count();
        dynamic as f64 / self.len() as f64
    }

    pub fn save_jsonl(&self, path: &Path) -> Result<()> {
        let mut lines = vec![Line::Header(Header {
            sequence_id: self.sequence_id.clone(),
            fps: self.fps,
            frame_count: self.len(),
            intrinsics: self.intrinsics,
            room: self.room,
            objects: self
                .objects
                .iter()
                .map(|o| ObjectMeta {
                    id: o.id,
                    label: o.label.clone(),
                    color: o.color,
                    half_extents: o.half_extents,
                })
                .collect(),
            agents: self
                .agents
                .iter()
                .map(|a| AgentMeta {
                    id: a.id,
                    ego: a.ego,
                    height: a.height,
                })
                .collect(),
            grabs: self.grabs.clone(),
        })];
        for i in 0..self.len() {
            lines.push(Line::Frame(FrameLine {
                i,
                t: self.times[i],
                camera: self.camera[i],
                objects: self
                    .objects
                    .iter()
                    .map(|o| ObjectState {
                        id: o.id,
                        center: o.centers[i],
                        yaw: o.yaws[i],
                    })
                    .collect(),
                agents: self
                    .agents
                    .iter()
                    .map(|a| AgentState {
                        id: a.id,
                        position: a.positions[i],
                        yaw: a.yaws[i],
                    })
                    .collect(),
                grabbed: self.grabbed[i].clone(),
            }));
        }
        binio::write_jsonl(path, lines)
    }

    pub fn load_jsonl(path: &Path) -> Result<Self> {
        let lines: Vec<Line> = binio::read_jsonl(path)?;
        let mut it = lines.into_iter();
        let header = match it.next() {
            Some(Line::Header(h)) => h,
            _ => return Err(Error::format(path, "first line must be the header")),
        };
        let mut gt = GroundTruth {
            sequence_id: header.sequence_id,
            fps: header.fps,
            intrinsics: header.intrinsics,
            room: header.room,
            times: Vec::with_capacity(header.frame_count),
            objects: header
                .objects
                .into_iter()
                .map(|o| ObjectTrack {
                    id: o.id,
                    label: o.label,
                    color: o.color,
                    half_extents: o.half_extents,
                    centers: Vec::new(),
                    yaws: Vec::new(),
                })
                .collect(),
            agents: header
                .agents
                .into_iter()
                .map(|a| AgentTrack {
                    id: a.id,
                    ego: a.ego,
                    height: a.height,
                    positions: Vec::new(),
                    yaws: Vec::new(),
                })
                .collect(),
            grabs: header.grabs,
            camera: Vec::new(),
            grabbed: Vec::new(),
        };
        if gt.agents.first().map(|a| a.ego) != Some(true) {
            return Err(Error::format(path, "first agent must be the ego agent"));
        }
        for line in it {
            let Line::Frame(f) = line else {
                return Err(Error::format(path, "duplicate header"));
            };
            if f.i != gt.times.len() {
                return Err(Error::format(path, format!("frame {} out of order", f.i)));
            }
            if f.objects.len() != gt.objects.len() || f.agents.len() != gt.agents.len() {
                return Err(Error::format(path, format!("frame {} entity count mismatch", f.i)));
            }
            gt.times.push(f.t);
            gt.camera.push(f.camera);
            gt.grabbed.push(f.grabbed);
            for (track, s) in gt.objects.iter_mut().zip(f.objects) {
                if track.id != s.id {
                    return Err(Error::format(path, format!("frame {}: object order differs from header", f.i)));
                }
                track.centers.push(s.center);
                track.yaws.push(s.yaw);
            }
            for (track, s) in gt.agents.iter_mut().zip(f.agents) {
                if track.id != s.id {
                    return Err(Error::format(path, format!("frame {}: agent order differs from header", f.i)));
                }
                track.positions.push(s.position);
                track.yaws.push(s.yaw);
            }
        }
        if gt.times.len() != header.frame_count {
            return Err(Error::format(
                path,
                format!("{} frames but header says {}", gt.times.len(), header.frame_count),
            ));
        }
        Ok(gt)
    }
}

/// Kinematics of object or agent `id` at the frame nearest `t`.
pub fn ground_truth_properties(gt: &GroundTruth, id: u32, t: f64) -> Result<Properties> {
    let i = gt.frame_at(t)?;
    gt.properties_at(id, i)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header(Header),
    Frame(FrameLine),
}

#[derive(Serialize, Deserialize)]
struct Header {
    sequence_id: String,
    fps: f64,
    frame_count: usize,
    intrinsics: Intrinsics,
    room: Aabb,
    objects: Vec<ObjectMeta>,
    agents: Vec<AgentMeta>,
    grabs: Vec<GrabEvent>,
}

#[derive(Serialize, Deserialize)]
struct ObjectMeta {
    id: u32,
    label: String,
    color: [u8; 3],
    half_extents: Vec3,
}

#[derive(Serialize, Deserialize)]
struct AgentMeta {
    id: u32,
    ego: bool,
    height: f64,
}

#[derive(Serialize, Deserialize)]
struct FrameLine {
    i: usize,
    t: f64,
    camera: CameraPose,
    objects: Vec<ObjectState>,
    agents: Vec<AgentState>,
    grabbed: Vec<(u32, u32)>,
}

#[derive(Serialize, Deserialize)]
struct ObjectState {
    id: u32,
    center: Vec3,
    yaw: f64,
}

#[derive(Serialize, Deserialize)]
struct AgentState {
    id: u32,
    position: Vec3,
    yaw: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::angle_diff;
    use crate::sim::{simulate, ObjectSpec, SimConfig, TrajectorySpec, Waypoint};

    fn cfg_with(objects: Vec<ObjectSpec>, duration: f64, fps: f64) -> SimConfig {
        let mut c = SimConfig::demo();
        c.objects = objects;
        c.ego.grabs.clear();
        c.extra_agents.clear();
        c.duration = duration;
        c.fps = fps;
        c
    }

    fn obj(id: u32, traj: TrajectorySpec) -> ObjectSpec {
        ObjectSpec {
            id,
            label: "box".into(),
            half_extents: [0.1; 3],
            color: [1, 2, 3],
            trajectory: traj,
            static_intervals: vec![],
        }
    }

    #[test]
    fn static_object_has_zero_velocity() {
        let c = cfg_with(vec![obj(1, TrajectorySpec::constant([0.0, 1.0, 0.1], 0.0))], 2.0, 5.0);
        let gt = simulate(&c).unwrap().truth;
        for t in [0.0, 1.0, 2.0] {
            let p = ground_truth_properties(&gt, 1, t).unwrap();
            assert_eq!(p.velocity, [0.0; 3]);
            assert!(!p.is_moving);
        }
    }

    #[test]
    fn constant_velocity_speed_and_heading() {
        let traj = TrajectorySpec::new(vec![
            Waypoint { t: 0.0, position: [-1.0, 0.0, 0.1], yaw: 0.0 },
            Waypoint { t: 4.0, position: [1.0, 0.0, 0.1], yaw: 0.0 },
        ]);
        let c = cfg_with(vec![obj(1, traj)], 4.0, 5.0);
        let gt = simulate(&c).unwrap().truth;
        for t in [0.0, 1.0, 2.6, 4.0] {
            let p = ground_truth_properties(&gt, 1, t).unwrap();
            assert!((p.speed - 0.5).abs() < 1e-12);
            assert_eq!(p.heading, 0.0);
            assert!(p.is_moving);
        }
    }

    #[test]
    fn heading_change_matches_analytic_derivative() {
        let traj = TrajectorySpec::new(vec![
            Waypoint { t: 0.0, position: [0.0, 0.0, 0.1], yaw: 0.0 },
            Waypoint { t: 2.0, position: [1.0, 0.0, 0.1], yaw: 0.0 },
            Waypoint { t: 4.0, position: [1.0, 1.0, 0.1], yaw: 0.0 },
        ]);
        let c = cfg_with(vec![obj(1, traj.clone())], 4.0, 5.0);
        let gt = simulate(&c).unwrap().truth;
        let before = ground_truth_properties(&gt, 1, 1.0).unwrap();
        let after = ground_truth_properties(&gt, 1, 3.0).unwrap();
        // closed-form derivative of the interpolant on each segment
        let h = |v: Vec3| v[1].atan2(v[0]);
        assert!(angle_diff(before.heading, h(traj.velocity(1.0))) < 1e-12);
        assert!(angle_diff(after.heading, h(traj.velocity(3.0))) < 1e-12);
        assert!((angle_diff(after.heading, before.heading) - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn finite_difference_converges_quadratically() {
        // smooth arc sampled by many waypoints so the interpolant is close to a circle
        let wps: Vec<Waypoint> = (0..=400)
            .map(|k| {
                let t = k as f64 * 0.01;
                Waypoint { t, position: [t.cos(), t.sin(), 0.1], yaw: 0.0 }
            })
            .collect();
        let truth_speed = 1.0;
        let err = |fps: f64| {
            let c = cfg_with(vec![obj(1, TrajectorySpec::new(wps.clone()))], 3.0, fps);
            let gt = simulate(&c).unwrap().truth;
            let p = ground_truth_properties(&gt, 1, 1.0).unwrap();
            // chord vs arc: the central difference underestimates the speed by ~h^2/6
            (p.speed - truth_speed).abs()
        };
        let (e1, e2) = (err(5.0), err(10.0));
        let ratio = e1 / e2;
        assert!(ratio > 3.0 && ratio < 5.0, "{e1} {e2} {ratio}");
    }

    #[test]
    fn unknown_id_is_error() {
        let gt = simulate(&cfg_with(vec![], 1.0, 5.0)).unwrap().truth;
        assert!(matches!(ground_truth_properties(&gt, 999, 0.0), Err(Error::NotFound(_))));
        assert!(ground_truth_properties(&gt, 100, 50.0).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let gt = simulate(&SimConfig::demo()).unwrap().truth;
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ground_truth.jsonl");
        gt.save_jsonl(&p).unwrap();
        assert_eq!(GroundTruth::load_jsonl(&p).unwrap(), gt);
    }
}
