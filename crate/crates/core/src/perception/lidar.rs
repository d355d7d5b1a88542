use std::f64::consts::TAU;

use crate::geometry::{ray_cast, OrientedRect, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OcclusionMode {
    /// Rays stop at the nearest of the object and the obstacles.
    Realistic,
    /// Rays pass through the manipulated object and only see obstacles.
    ObjectFiltered,
}

/// One 360° scan from the base center. Angles are world-frame.
#[derive(Debug, Clone, PartialEq)]
pub struct LidarScan {
    pub origin: crate::geometry::Vec2,
    pub max_range: f64,
    pub angles: Vec<f64>,
    pub ranges: Vec<f64>,
    pub hit_is_object: Vec<bool>,
}

impl LidarScan {
    pub fn beam_count(&self) -> usize {
        self.angles.len()
    }

    /// Whether beam `k` terminated on a body rather than at max range.
    pub fn is_hit(&self, k: usize) -> bool {
        self.ranges[k] < self.max_range
    }
}

/// Smallest reported range, keeps every range strictly positive.
const MIN_RANGE: f64 = 1e-6;

pub fn simulate_lidar(
    world: &WorldState,
    beam_count: usize,
    max_range: f64,
    mode: OcclusionMode,
) -> LidarScan {
    assert!(beam_count >= 8, "beam_count must be at least 8");
    assert!(max_range > 0.0);
    let mut bodies: Vec<OrientedRect> = Vec::with_capacity(world.obstacles.len() + 1);
    let object_index = match mode {
        OcclusionMode::Realistic => {
            bodies.push(world.object);
            Some(0)
        }
        OcclusionMode::ObjectFiltered => None,
    };
    bodies.extend_from_slice(&world.obstacles);

    let origin = world.base.position();
    let mut angles = Vec::with_capacity(beam_count);
    let mut ranges = Vec::with_capacity(beam_count);
    let mut hit_is_object = Vec::with_capacity(beam_count);
    for k in 0..beam_count {
        let angle = world.base.yaw + TAU * k as f64 / beam_count as f64;
        let hit = ray_cast(origin, angle, &bodies, max_range);
        angles.push(angle);
        ranges.push(hit.distance.max(MIN_RANGE));
        hit_is_object.push(hit.hit_index.is_some() && hit.hit_index == object_index);
    }
    LidarScan {
        origin,
        max_range,
        angles,
        ranges,
        hit_is_object,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Pose2D, Vec2};

    fn world(obstacles: Vec<OrientedRect>) -> WorldState {
        WorldState {
            base: Pose2D::new(0.0, 0.0, 0.0),
            pusher: Vec2::new(0.9, 0.0),
            object: OrientedRect::square(Pose2D::new(1.5, 0.0, 0.0), 1.0),
            obstacles,
            goal: Pose2D::new(12.0, 0.0, 0.0),
            sim_time: 0.0,
        }
    }

    #[test]
    fn object_occludes_obstacle_behind_it() {
        let w = world(vec![OrientedRect::square(Pose2D::new(4.0, 0.0, 0.0), 0.6)]);
        let scan = simulate_lidar(&w, 180, 8.0, OcclusionMode::Realistic);
        assert!((scan.ranges[0] - 1.0).abs() < 1e-12);
        assert!(scan.hit_is_object[0]);

        let filtered = simulate_lidar(&w, 180, 8.0, OcclusionMode::ObjectFiltered);
        assert!((filtered.ranges[0] - 3.7).abs() < 1e-12);
        assert!(!filtered.hit_is_object[0]);
    }

    #[test]
    fn empty_scene_reads_max_range() {
        let mut w = world(vec![]);
        w.object = OrientedRect::square(Pose2D::new(100.0, 0.0, 0.0), 1.0);
        let scan = simulate_lidar(&w, 36, 8.0, OcclusionMode::Realistic);
        assert!(scan.ranges.iter().all(|&r| r == 8.0));
        assert_eq!(scan.beam_count(), 36);
    }
}
