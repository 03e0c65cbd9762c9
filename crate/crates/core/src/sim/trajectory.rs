use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{add, scale, sub, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waypoint {
    pub t: f64,
    pub position: Vec3,
    #[serde(default)]
    pub yaw: f64,
}

/// Piecewise-linear path through timed waypoints; held constant before the
/// first and after the last waypoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TrajectorySpec {
    pub waypoints: Vec<Waypoint>,
}

impl TrajectorySpec {
    pub fn constant(position: Vec3, yaw: f64) -> Self {
        TrajectorySpec {
            waypoints: vec![Waypoint { t: 0.0, position, yaw }],
        }
    }

    pub fn new(waypoints: Vec<Waypoint>) -> Self {
        TrajectorySpec { waypoints }
    }

    pub fn validate(&self, what: &str) -> Result<()> {
        if self.waypoints.is_empty() {
            return Err(Error::Config(format!("{what}: trajectory needs at least one waypoint")));
        }
        for w in self.waypoints.windows(2) {
            if !(w[1].t > w[0].t) {
                return Err(Error::Config(format!("{what}: waypoint times must strictly increase")));
            }
        }
        if self
            .waypoints
            .iter()
            .any(|w| !w.t.is_finite() || !w.yaw.is_finite() || w.position.iter().any(|p| !p.is_finite()))
        {
            return Err(Error::Config(format!("{what}: non-finite waypoint")));
        }
        Ok(())
    }

    /// Index `k` of the segment `[k, k+1]` containing `t`, if `t` is strictly
    /// inside the waypoint span.
    fn segment(&self, t: f64) -> Option<usize> {
        let w = &self.waypoints;
        if w.len() < 2 || t <= w[0].t || t >= w[w.len() - 1].t {
            return None;
        }
        Some(w.partition_point(|p| p.t <= t) - 1)
    }

    pub fn pose(&self, t: f64) -> (Vec3, f64) {
        let w = &self.waypoints;
        match self.segment(t) {
            Some(k) => {
                let (a, b) = (&w[k], &w[k + 1]);
                let s = (t - a.t) / (b.t - a.t);
                (add(a.position, scale(sub(b.position, a.position), s)), a.yaw + (b.yaw - a.yaw) * s)
            }
            None if t <= w[0].t => (w[0].position, w[0].yaw),
            None => {
                let l = &w[w.len() - 1];
                (l.position, l.yaw)
            }
        }
    }

    /// Analytic velocity of the interpolant (zero outside the span; at a
    /// waypoint the right-hand segment is used).
    pub fn velocity(&self, t: f64) -> Vec3 {
        let w = &self.waypoints;
        let k = if w.len() >= 2 && t >= w[0].t && t < w[w.len() - 1].t {
            w.partition_point(|p| p.t <= t) - 1
        } else {
            return [0.0; 3];
        };
        let (a, b) = (&w[k], &w[k + 1]);
        scale(sub(b.position, a.position), 1.0 / (b.t - a.t))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line() -> TrajectorySpec {
        TrajectorySpec::new(vec![
            Waypoint { t: 0.0, position: [0.0; 3], yaw: 0.0 },
            Waypoint { t: 2.0, position: [1.0, 0.0, 0.0], yaw: 1.0 },
        ])
    }

    #[test]
    fn midpoint() {
        let (p, yaw) = line().pose(1.0);
        assert_eq!(p, [0.5, 0.0, 0.0]);
        assert_eq!(yaw, 0.5);
    }

    #[test]
    fn clamps_outside_span() {
        assert_eq!(line().pose(-1.0).0, [0.0; 3]);
        assert_eq!(line().pose(5.0).0, [1.0, 0.0, 0.0]);
        assert_eq!(line().velocity(5.0), [0.0; 3]);
    }

    #[test]
    fn single_waypoint_is_constant() {
        let t = TrajectorySpec::constant([1.0, 2.0, 0.5], 0.3);
        for s in [0.0, 0.7, 100.0] {
            assert_eq!(t.pose(s), ([1.0, 2.0, 0.5], 0.3));
        }
    }

    #[test]
    fn rejects_non_increasing_times() {
        let t = TrajectorySpec::new(vec![
            Waypoint { t: 1.0, position: [0.0; 3], yaw: 0.0 },
            Waypoint { t: 1.0, position: [1.0; 3], yaw: 0.0 },
        ]);
        assert!(t.validate("x").is_err());
        assert!(TrajectorySpec::new(vec![]).validate("x").is_err());
    }
}
