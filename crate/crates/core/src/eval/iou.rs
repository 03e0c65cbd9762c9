use crate::error::{Error, Result};
use crate::geometry::{angle_diff, BBox3D};

type P2 = [f64; 2];

fn cross(o: P2, a: P2, b: P2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

fn polygon_area(p: &[P2]) -> f64 {
    let n = p.len();
    if n < 3 {
        return 0.0;
    }
    0.5 * (0..n)
        .map(|i| {
            let (a, b) = (p[i], p[(i + 1) % n]);
            a[0] * b[1] - a[1] * b[0]
        })
        .sum::<f64>()
        .abs()
}

fn line_hit(p: P2, q: P2, a: P2, b: P2) -> P2 {
    let (d1, d2) = (cross(a, b, p), cross(a, b, q));
    let s = d1 / (d1 - d2);
    [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]
}

/// Clips `subject` by the convex counter-clockwise polygon `clip`.
fn clip_convex(subject: &[P2], clip: &[P2]) -> Vec<P2> {
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        let (a, b) = (clip[i], clip[(i + 1) % clip.len()]);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let (p, q) = (input[j], input[(j + 1) % input.len()]);
            let (pin, qin) = (cross(a, b, p) >= 0.0, cross(a, b, q) >= 0.0);
            if pin {
                out.push(p);
            }
            if pin != qin {
                out.push(line_hit(p, q, a, b));
            }
        }
        if out.is_empty() {
            break;
        }
    }
    out
}

fn vertical_overlap(a: &BBox3D, b: &BBox3D) -> f64 {
    let lo = (a.center[2] - a.half_extents[2]).max(b.center[2] - b.half_extents[2]);
    let hi = (a.center[2] + a.half_extents[2]).min(b.center[2] + b.half_extents[2]);
    (hi - lo).max(0.0)
}

/// Intersection over union of two yaw-only oriented boxes.
pub fn iou3d(a: &BBox3D, b: &BBox3D) -> Result<f64> {
    for x in [a, b] {
        if !x.is_valid() {
            return Err(Error::Degenerate(format!("box {x:?} has zero volume or non-finite fields")));
        }
    }
    let inter = if angle_diff(a.yaw, b.yaw) == 0.0 {
        // same orientation: axis-aligned overlap in a's frame
        let c = a.to_local(b.center);
        let ov = |k: usize| {
            let lo = (-a.half_extents[k]).max(c[k] - b.half_extents[k]);
            let hi = a.half_extents[k].min(c[k] + b.half_extents[k]);
            (hi - lo).max(0.0)
        };
        ov(0) * ov(1) * ov(2)
    } else {
        polygon_area(&clip_convex(&b.footprint(), &a.footprint())) * vertical_overlap(a, b)
    };
    let union = a.volume() + b.volume() - inter;
    Ok((inter / union).clamp(0.0, 1.0))
}
