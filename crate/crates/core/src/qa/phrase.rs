//! Question templates. The seed only picks among equivalent phrasings.

use crate::lifting::instance_seed;

use super::types::{TaskKind, WindowSpec};

fn pick(seed: u64, task: TaskKind, key: usize, salt: u32) -> usize {
    let s = instance_seed(seed ^ ((task as u64) << 48), salt);
    (instance_seed(s, key as u32) % 3) as usize
}

fn span(w: &WindowSpec) -> String {
    format!("between t={:.1}s and t={:.1}s", w.start, w.end)
}

pub fn dynamic_scene(seed: u64, key: usize, t: f64) -> String {
    match pick(seed, TaskKind::DynamicScene, key, 0) {
        0 => format!("Which objects are moving at t={t:.1}s?"),
        1 => format!("At t={t:.1}s, list every object that is in motion."),
        _ => format!("Which objects in the scene are not at rest at t={t:.1}s?"),
    }
}

pub fn relative_position(seed: u64, key: usize, t: f64, b: &str, bid: u32, a: &str, aid: u32) -> String {
    match pick(seed, TaskKind::RelativePosition, key, bid ^ (aid << 16)) {
        0 => format!("From my viewpoint at t={t:.1}s, where is the {b} (#{bid}) relative to the {a} (#{aid})?"),
        1 => format!("At t={t:.1}s, as I see it, where is the {b} (#{bid}) with respect to the {a} (#{aid}), and is it near or far?"),
        _ => format!("Looking from my position at t={t:.1}s, describe where the {b} (#{bid}) sits compared to the {a} (#{aid})."),
    }
}

pub fn object_property(seed: u64, key: usize, t: f64, what: &str, label: &str, id: u32) -> String {
    let v = pick(seed, TaskKind::CurrentObjectProperty, key, id);
    match (what, v) {
        ("position", 0) => format!("What is the 3D position of the {label} (#{id}) at t={t:.1}s?"),
        ("position", 1) => format!("Where exactly is the {label} (#{id}) at t={t:.1}s, in world coordinates?"),
        ("position", _) => format!("Give the center coordinates of the {label} (#{id}) at t={t:.1}s."),
        ("speed", 0) => format!("How fast is the {label} (#{id}) moving at t={t:.1}s?"),
        ("speed", 1) => format!("What is the speed of the {label} (#{id}) at t={t:.1}s?"),
        ("speed", _) => format!("At t={t:.1}s, at what speed is the {label} (#{id}) traveling?"),
        ("distance", 0) => format!("How far is the {label} (#{id}) from me at t={t:.1}s?"),
        ("distance", 1) => format!("What is the distance between me and the {label} (#{id}) at t={t:.1}s?"),
        ("distance", _) => format!("At t={t:.1}s, how many meters away from me is the {label} (#{id})?"),
        (_, 0) => format!("What is the 3D bounding box of the {label} (#{id}) at t={t:.1}s?"),
        (_, 1) => format!("Give the oriented box enclosing the {label} (#{id}) at t={t:.1}s."),
        (_, _) => format!("At t={t:.1}s, what box (center, size, yaw) does the {label} (#{id}) occupy?"),
    }
}

pub fn agent_velocity(seed: u64, key: usize, t: f64) -> String {
    match pick(seed, TaskKind::AgentVelocity, key, 0) {
        0 => format!("What is my speed and heading at t={t:.1}s?"),
        1 => format!("At t={t:.1}s, how fast am I moving and in which direction?"),
        _ => format!("Give my current velocity (speed and heading) at t={t:.1}s."),
    }
}

pub fn multi_agent(seed: u64, key: usize, t: f64, other: u32) -> String {
    match pick(seed, TaskKind::MultiAgentRelation, key, other) {
        0 => format!("At t={t:.1}s, is the person (#{other}) approaching me, moving away, or keeping distance?"),
        1 => format!("Is the other person (#{other}) getting closer to me at t={t:.1}s?"),
        _ => format!("How is the distance between me and the person (#{other}) changing at t={t:.1}s?"),
    }
}

pub fn motion_sequence(seed: u64, key: usize, w: &WindowSpec) -> String {
    match pick(seed, TaskKind::MotionSequence, key, 0) {
        0 => format!("In what order did objects start moving {}?", span(w)),
        1 => format!("{}, list the objects in the order they began to move.", capital(&span(w))),
        _ => format!("Which objects set off first, second, and so on {}?", span(w)),
    }
}

pub fn most_active(seed: u64, key: usize, w: &WindowSpec) -> String {
    match pick(seed, TaskKind::MostActiveObject, key, 0) {
        0 => format!("Which object traveled the farthest {}?", span(w)),
        1 => format!("{}, which object was the most active?", capital(&span(w))),
        _ => format!("Which object covered the longest path {}?", span(w)),
    }
}

pub fn temporary_static(seed: u64, key: usize, w: &WindowSpec, dwell: f64) -> String {
    match pick(seed, TaskKind::TemporaryStaticObjects, key, 0) {
        0 => format!("Which objects stopped for at least {dwell:.0}s and then moved again {}?", span(w)),
        1 => format!("{}, which objects paused temporarily (>= {dwell:.0}s) before resuming motion?", capital(&span(w))),
        _ => format!("List the objects that were briefly static for {dwell:.0}s or more {} but not for good.", span(w)),
    }
}

pub fn agent_trajectory(seed: u64, key: usize, w: &WindowSpec) -> String {
    match pick(seed, TaskKind::AgentTrajectory, key, 0) {
        0 => format!("Which compass directions did I walk in, in order, {}?", span(w)),
        1 => format!("Describe my route {} as a sequence of directions.", span(w)),
        _ => format!("{}, which way did I head, step by step?", capital(&span(w))),
    }
}

pub fn agent_motion_status(seed: u64, key: usize, w: &WindowSpec) -> String {
    match pick(seed, TaskKind::AgentMotionStatus, key, 0) {
        0 => format!("How did my motion state change {}?", span(w)),
        1 => format!("{}, was I walking, turning, or standing still, and in what order?", capital(&span(w))),
        _ => format!("Give the sequence of my movement states {}.", span(w)),
    }
}

pub fn agent_grab(seed: u64, key: usize, w: &WindowSpec, who: &str, id: u32) -> String {
    let subject = if who == "camera wearer" { "I".to_string() } else { format!("the {who} (#{id})") };
    match pick(seed, TaskKind::AgentGrabObject, key, id) {
        0 => format!("Which object did {subject} pick up {}?", span(w)),
        1 => format!("{}, what did {subject} grab first?", capital(&span(w))),
        _ => format!("What was the first object {subject} took hold of {}?", span(w)),
    }
}

pub fn caption(t: f64, label: &str, id: u32, b: &crate::geometry::BBox3D) -> String {
    format!(
        "Describe the object (#{id}, a {label}) in the box centered at ({:.2}, {:.2}, {:.2}) with size ({:.2}, {:.2}, {:.2}) and yaw {:.2} at t={t:.1}s.",
        b.center[0],
        b.center[1],
        b.center[2],
        2.0 * b.half_extents[0],
        2.0 * b.half_extents[1],
        2.0 * b.half_extents[2],
        b.yaw
    )
}

fn capital(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}
