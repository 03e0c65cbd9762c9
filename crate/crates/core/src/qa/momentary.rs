//! Single-instant questions asked at a sampled frame.

use crate::error::Result;
use crate::geometry::BBox3D;
use crate::sim::GroundTruth;

use super::cot::{self, Calc, CotStep};
use super::types::{Anchors, Answer, QAPair, TaskKind, Unit};
use super::phrase;

fn pair(gt: &GroundTruth, task: TaskKind, question: String, answer: Answer, cot: Vec<CotStep>, t: f64, ids: Vec<u32>) -> QAPair {
    QAPair {
        id: String::new(),
        task,
        question,
        answer,
        cot,
        anchors: Anchors {
            sequence_id: gt.sequence_id.clone(),
            times: vec![t],
            ids,
        },
    }
}

/// Central-difference velocity of `id` at frame `i`, with the steps that
/// compute it.
fn velocity_steps(gt: &GroundTruth, id: u32, i: usize, cot: &mut Vec<CotStep>) -> Result<[f64; 3]> {
    let track = gt.track(id)?;
    let n = track.len();
    let (a, b) = if n < 2 {
        (i, i)
    } else if i == 0 {
        (0, 1)
    } else if i == n - 1 {
        (n - 2, n - 1)
    } else {
        (i - 1, i + 1)
    };
    let name = gt.label_of(id);
    let (pa, pb) = (track[a], track[b]);
    cot.push(CotStep::calc(
        format!("{name} (#{id}) is at {} at t={:.1}s", fmt3(pa), gt.times[a]),
        Calc::Position { id, frame: a, result: pa },
    ));
    cot.push(CotStep::calc(
        format!("{name} (#{id}) is at {} at t={:.1}s", fmt3(pb), gt.times[b]),
        Calc::Position { id, frame: b, result: pb },
    ));
    if a == b {
        cot.push(CotStep::note("only one sample, velocity is zero"));
        return Ok([0.0; 3]);
    }
    let dt = gt.times[b] - gt.times[a];
    let v = cot::velocity(pa, pb, dt);
    cot.push(CotStep::calc(
        format!("velocity = displacement / {dt:.2}s = {}", fmt3(v)),
        Calc::Velocity { a: pa, b: pb, dt, result: v },
    ));
    Ok(v)
}

pub(crate) fn fmt3(v: [f64; 3]) -> String {
    format!("({:.2}, {:.2}, {:.2})", v[0], v[1], v[2])
}

fn speed_steps(gt: &GroundTruth, id: u32, i: usize, cot: &mut Vec<CotStep>) -> Result<f64> {
    let v = velocity_steps(gt, id, i, cot)?;
    let s = crate::geometry::norm(v);
    cot.push(CotStep::calc(format!("speed = |v| = {s:.3} m/s"), Calc::Norm { v, result: s }));
    Ok(s)
}

pub(crate) fn dynamic_scene(gt: &GroundTruth, i: usize, seed: u64) -> Result<Option<QAPair>> {
    if gt.objects.is_empty() {
        return Ok(None);
    }
    let t = gt.times[i];
    let mut cot = Vec::new();
    let mut ids = Vec::new();
    let mut flags = Vec::new();
    for o in &gt.objects {
        let s = speed_steps(gt, o.id, i, &mut cot)?;
        let m = cot::is_moving(s);
        cot.push(CotStep::calc(
            format!("{} is {}", o.label, if m { "moving" } else { "static" }),
            Calc::IsMoving { speed: s, result: m },
        ));
        ids.push(o.id);
        flags.push(m);
    }
    let moving: Vec<u32> = ids.iter().zip(&flags).filter(|p| *p.1).map(|p| *p.0).collect();
    cot.push(CotStep::calc(
        format!("moving objects: {moving:?}"),
        Calc::Select { ids: ids.clone(), flags, result: moving.clone() },
    ));
    let q = phrase::dynamic_scene(seed, i, t);
    Ok(Some(pair(gt, TaskKind::DynamicScene, q, Answer::IdSet { value: moving }, cot, t, ids)))
}

pub(crate) fn relative_position(gt: &GroundTruth, i: usize, seed: u64) -> Result<Vec<QAPair>> {
    let n = gt.objects.len();
    if n < 2 {
        return Ok(Vec::new());
    }
    let t = gt.times[i];
    let ego = gt.ego();
    let yaw = ego.yaws[i];
    let pairs = if n == 2 { 1 } else { n };
    let mut out = Vec::new();
    for k in 0..pairs {
        let (a, b) = (&gt.objects[k], &gt.objects[(k + 1) % n]);
        let (pa, pb) = (a.centers[i], b.centers[i]);
        let mut cot = vec![
            CotStep::calc(format!("{} (#{}) center {}", a.label, a.id, fmt3(pa)), Calc::Position { id: a.id, frame: i, result: pa }),
            CotStep::calc(format!("{} (#{}) center {}", b.label, b.id, fmt3(pb)), Calc::Position { id: b.id, frame: i, result: pb }),
            CotStep::calc(format!("camera wearer faces yaw {yaw:.2} rad"), Calc::Yaw { id: ego.id, frame: i, result: yaw }),
        ];
        let rf = cot::ego_frame(pa, pb, yaw);
        cot.push(CotStep::calc(
            format!("in the wearer's view the {} is {:.2} m right and {:.2} m ahead of the {}", b.label, rf[0], rf[1], a.label),
            Calc::EgoFrame { a: pa, b: pb, yaw, result: rf },
        ));
        let d = crate::geometry::distance(pa, pb);
        cot.push(CotStep::calc(format!("center distance {d:.2} m"), Calc::Distance { a: pa, b: pb, result: d }));
        let label = cot::relative_label(rf[0], rf[1], d);
        cot.push(CotStep::calc(
            format!("offsets beyond {} m and range threshold {} m give \"{label}\"", cot::DEAD_BAND, cot::NEAR_DISTANCE),
            Calc::RelativeLabel { right: rf[0], forward: rf[1], distance: d, result: label.clone() },
        ));
        let q = phrase::relative_position(seed, i, t, &b.label, b.id, &a.label, a.id);
        out.push(pair(gt, TaskKind::RelativePosition, q, Answer::Label { value: label }, cot, t, vec![b.id, a.id]));
    }
    Ok(out)
}

pub(crate) fn current_object_property(gt: &GroundTruth, i: usize, sample: usize, seed: u64) -> Result<Vec<QAPair>> {
    let t = gt.times[i];
    let mut out = Vec::new();
    for (k, o) in gt.objects.iter().enumerate() {
        let mut cot = Vec::new();
        let (variant, answer) = match (sample + k) % 4 {
            0 => {
                let p = o.centers[i];
                cot.push(CotStep::calc(format!("{} center at t={t:.1}s is {}", o.label, fmt3(p)), Calc::Position { id: o.id, frame: i, result: p }));
                ("position", Answer::Vector { value: p, unit: Unit::Meters })
            }
            1 => {
                let s = speed_steps(gt, o.id, i, &mut cot)?;
                ("speed", Answer::Scalar { value: s, unit: Unit::MetersPerSecond })
            }
            2 => {
                let ego = gt.ego();
                let (pe, po) = (ego.positions[i], o.centers[i]);
                cot.push(CotStep::calc(format!("camera wearer at {}", fmt3(pe)), Calc::Position { id: ego.id, frame: i, result: pe }));
                cot.push(CotStep::calc(format!("{} at {}", o.label, fmt3(po)), Calc::Position { id: o.id, frame: i, result: po }));
                let d = crate::geometry::distance(pe, po);
                cot.push(CotStep::calc(format!("distance {d:.2} m"), Calc::Distance { a: pe, b: po, result: d }));
                ("distance", Answer::Scalar { value: d, unit: Unit::Meters })
            }
            _ => {
                let b = BBox3D::new(o.centers[i], o.half_extents, o.yaws[i]);
                cot.push(CotStep::calc(
                    format!("{} box: center {}, half extents {}, yaw {:.2}", o.label, fmt3(b.center), fmt3(b.half_extents), b.yaw),
                    Calc::BoxAt { id: o.id, frame: i, result: b },
                ));
                ("box", Answer::Box { value: b })
            }
        };
        let q = phrase::object_property(seed, i, t, variant, &o.label, o.id);
        out.push(pair(gt, TaskKind::CurrentObjectProperty, q, answer, cot, t, vec![o.id]));
    }
    Ok(out)
}

pub(crate) fn agent_velocity(gt: &GroundTruth, i: usize, seed: u64) -> Result<QAPair> {
    let t = gt.times[i];
    let ego = gt.ego();
    let mut cot = Vec::new();
    let v = velocity_steps(gt, ego.id, i, &mut cot)?;
    let m = cot::polar(v);
    cot.push(CotStep::calc(
        format!("speed {:.3} m/s, heading atan2(vy, vx) = {:.3} rad", m.speed, m.heading),
        Calc::Polar { v, result: m },
    ));
    let q = phrase::agent_velocity(seed, i, t);
    Ok(pair(gt, TaskKind::AgentVelocity, q, Answer::Motion { speed: m.speed, heading: m.heading }, cot, t, vec![ego.id]))
}

pub(crate) fn multi_agent_relation(gt: &GroundTruth, i: usize, seed: u64) -> Result<Vec<QAPair>> {
    if gt.agents.len() < 2 {
        return Ok(Vec::new());
    }
    let t = gt.times[i];
    let n = gt.len();
    let (a, b) = if n < 2 {
        return Ok(Vec::new());
    } else if i == 0 {
        (0, 1)
    } else if i == n - 1 {
        (n - 2, n - 1)
    } else {
        (i - 1, i + 1)
    };
    let ego = gt.ego();
    let dt = gt.times[b] - gt.times[a];
    let mut out = Vec::new();
    for other in &gt.agents[1..] {
        let mut cot = Vec::new();
        let dist = |f: usize, cot: &mut Vec<CotStep>| {
            let (pe, po) = (ego.positions[f], other.positions[f]);
            cot.push(CotStep::calc(format!("t={:.1}s: wearer at {}", gt.times[f], fmt3(pe)), Calc::Position { id: ego.id, frame: f, result: pe }));
            cot.push(CotStep::calc(format!("t={:.1}s: person #{} at {}", gt.times[f], other.id, fmt3(po)), Calc::Position { id: other.id, frame: f, result: po }));
            let d = crate::geometry::distance(pe, po);
            cot.push(CotStep::calc(format!("separation {d:.3} m"), Calc::Distance { a: pe, b: po, result: d }));
            d
        };
        let d0 = dist(a, &mut cot);
        let d1 = dist(b, &mut cot);
        let rate = (d1 - d0) / dt;
        cot.push(CotStep::calc(format!("range rate {rate:.3} m/s"), Calc::RangeRate { d0, d1, dt, result: rate }));
        let label = cot::relation(rate);
        cot.push(CotStep::calc(
            format!("|rate| vs {} m/s gives \"{label}\"", cot::RANGE_RATE_THRESHOLD),
            Calc::Relation { rate, result: label.clone() },
        ));
        let q = phrase::multi_agent(seed, i, t, other.id);
        out.push(pair(gt, TaskKind::MultiAgentRelation, q, Answer::Label { value: label }, cot, t, vec![ego.id, other.id]));
    }
    Ok(out)
}
