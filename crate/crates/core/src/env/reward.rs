//! Shaped reward terms and episode termination checks.

use crate::geometry::{disc_overlap, rect_overlap, Action, OrientedRect, Vec2, WorldState};

use super::config::{EpisodeConfig, RewardConfig};

/// Object speed below which the heading term treats the object as static.
pub const STATIC_SPEED: f64 = 1e-4;

/// Weighted reward terms, in order: goal keypoints, heading, speed, contact
/// target, action smoothness, action jerk. `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RewardBreakdown {
    pub terms: [f64; 6],
    pub total: f64,
}

/// Corner-stack distance between two rectangles (8-d Euclidean norm).
pub fn keypoint_distance(a: &OrientedRect, b: &OrientedRect) -> f64 {
    let ca = a.corners();
    let cb = b.corners();
    ca.iter()
        .zip(cb.iter())
        .map(|(p, q)| {
            let d = *p - *q;
            d.dot(d)
        })
        .sum::<f64>()
        .sqrt()
}

/// Mean per-corner distance, the success criterion.
pub fn mean_corner_distance(a: &OrientedRect, b: &OrientedRect) -> f64 {
    let ca = a.corners();
    let cb = b.corners();
    ca.iter().zip(cb.iter()).map(|(p, q)| (*p - *q).norm()).sum::<f64>() / 4.0
}

fn diff(a: &Action, b: &Action) -> [f64; 4] {
    let (a, b) = (a.as_array(), b.as_array());
    [a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]]
}

fn norm4(v: [f64; 4]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Inputs of one reward evaluation.
pub struct RewardInput<'a> {
    pub prev: &'a WorldState,
    pub cur: &'a WorldState,
    /// Commanded actions (physical units) at t, t-1 and t-2.
    pub action: &'a Action,
    pub prev_action: &'a Action,
    pub prev_prev_action: &'a Action,
    /// Designated contact point on the object, in the object frame.
    pub contact_local: Vec2,
}

pub fn compute_reward(input: &RewardInput<'_>, cfg: &EpisodeConfig, weights: &RewardConfig) -> RewardBreakdown {
    let cur = input.cur;
    let goal_rect = cur.goal_rect();

    let r1 = (-0.25 * keypoint_distance(&goal_rect, &cur.object)).exp();

    let prev_pos = input.prev.object.center();
    let velocity = (cur.object.center() - prev_pos) * (1.0 / cfg.dt);
    let speed = velocity.norm();
    let to_goal = cur.goal.position() - prev_pos;
    let heading = if speed < STATIC_SPEED || to_goal.norm() < 1e-12 {
        0.0
    } else {
        velocity.dot(to_goal) / (speed * to_goal.norm())
    };
    let r2 = (5.0 * (heading - 1.0)).exp();

    let r3 = speed / cfg.v_max;

    let target = cur.object.pose.transform_point(input.contact_local);
    let r4 = (-0.1 * (target - cur.pusher).norm()).exp();

    let r5 = norm4(diff(input.action, input.prev_action));
    let d1 = diff(input.action, input.prev_action);
    let d2 = diff(input.prev_action, input.prev_prev_action);
    let r6 = norm4([d1[0] - d2[0], d1[1] - d2[1], d1[2] - d2[2], d1[3] - d2[3]]);

    let raw = [r1, r2, r3, r4, r5, r6];
    let mut terms = [0.0; 6];
    for k in 0..6 {
        terms[k] = weights.weights[k] * raw[k];
    }
    let total = terms.iter().sum();
    RewardBreakdown { terms, total }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Termination {
    pub collision: bool,
    pub success: bool,
    pub timeout: bool,
}

impl Termination {
    pub fn terminal(&self) -> bool {
        self.collision || self.success || self.timeout
    }
}

/// Collision: object overlaps an obstacle, or the base disc touches one.
pub fn in_collision(world: &WorldState, base_radius: f64) -> bool {
    let base = world.base.position();
    world
        .obstacles
        .iter()
        .any(|o| rect_overlap(&world.object, o) || disc_overlap(base, base_radius, o))
}

pub fn check_termination(world: &WorldState, cfg: &EpisodeConfig) -> Termination {
    let collision = in_collision(world, cfg.base_radius);
    let success = !collision && mean_corner_distance(&world.object, &world.goal_rect()) < cfg.success_tolerance;
    let timeout = !collision && !success && world.sim_time >= cfg.timeout - 1e-9;
    Termination {
        collision,
        success,
        timeout,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Pose2D;
    use approx::assert_abs_diff_eq;

    fn world(obj: Pose2D, goal: Pose2D) -> WorldState {
        WorldState {
            base: Pose2D::new(obj.x - 1.7, obj.y, 0.0),
            pusher: Vec2::new(obj.x - 0.5, obj.y),
            object: OrientedRect::square(obj, 1.0),
            obstacles: vec![],
            goal,
            sim_time: 0.0,
        }
    }

    #[test]
    fn object_at_goal_gives_full_keypoint_term() {
        let w = world(Pose2D::new(3.0, 1.0, 0.0), Pose2D::new(3.0, 1.0, 0.0));
        let a = Action::default();
        let input = RewardInput {
            prev: &w,
            cur: &w,
            action: &a,
            prev_action: &a,
            prev_prev_action: &a,
            contact_local: Vec2::new(-0.5, 0.0),
        };
        let r = compute_reward(&input, &EpisodeConfig::default(), &RewardConfig::default());
        assert_abs_diff_eq!(r.terms[0], 4.0);
        // Static object: heading term uses a zero cosine.
        assert_abs_diff_eq!(r.terms[1], 2.0 * (-5.0f64).exp());
        assert_abs_diff_eq!(r.terms[2], 0.0);
        assert_abs_diff_eq!(r.terms[3], 1.0);
        assert_abs_diff_eq!(r.terms[4], 0.0);
        assert!(check_termination(&w, &EpisodeConfig::default()).success);
    }

    #[test]
    fn moving_toward_goal_maximises_heading() {
        let prev = world(Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(10.0, 0.0, 0.0));
        let cur = world(Pose2D::new(0.16, 0.0, 0.0), Pose2D::new(10.0, 0.0, 0.0));
        let a = Action::default();
        let input = RewardInput {
            prev: &prev,
            cur: &cur,
            action: &a,
            prev_action: &a,
            prev_prev_action: &a,
            contact_local: Vec2::new(-0.5, 0.0),
        };
        let r = compute_reward(&input, &EpisodeConfig::default(), &RewardConfig::default());
        assert_abs_diff_eq!(r.terms[1], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.terms[2], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn at_goal_moving_toward_it_gives_full_weights() {
        let goal = Pose2D::new(10.0, 0.0, 0.0);
        let prev = world(Pose2D::new(9.84, 0.0, 0.0), goal);
        let cur = world(goal, goal);
        let a = Action::default();
        let input = RewardInput {
            prev: &prev,
            cur: &cur,
            action: &a,
            prev_action: &a,
            prev_prev_action: &a,
            contact_local: Vec2::new(-0.5, 0.0),
        };
        let r = compute_reward(&input, &EpisodeConfig::default(), &RewardConfig::default());
        let expected = [4.0, 2.0, 1.0, 1.0, 0.0, 0.0];
        for k in 0..6 {
            assert_abs_diff_eq!(r.terms[k], expected[k], epsilon = 1e-9);
        }
        assert_abs_diff_eq!(r.total, 8.0, epsilon = 1e-9);
    }

    #[test]
    fn opposite_heading() {
        let prev = world(Pose2D::new(1.0, 0.0, 0.0), Pose2D::new(10.0, 0.0, 0.0));
        let cur = world(Pose2D::new(0.9, 0.0, 0.0), Pose2D::new(10.0, 0.0, 0.0));
        let a = Action::default();
        let input = RewardInput {
            prev: &prev,
            cur: &cur,
            action: &a,
            prev_action: &a,
            prev_prev_action: &a,
            contact_local: Vec2::ZERO,
        };
        let r = compute_reward(&input, &EpisodeConfig::default(), &RewardConfig::default());
        assert_abs_diff_eq!(r.terms[1], 2.0 * (-10.0f64).exp(), epsilon = 1e-15);
    }

    #[test]
    fn smoothness_terms_use_differences() {
        let w = world(Pose2D::new(0.0, 0.0, 0.0), Pose2D::new(10.0, 0.0, 0.0));
        let a0 = Action::default();
        let a1 = Action {
            base_velocity: Vec2::new(0.3, 0.0),
            pusher_velocity: Vec2::ZERO,
        };
        let a2 = Action {
            base_velocity: Vec2::new(0.3, 0.4),
            pusher_velocity: Vec2::ZERO,
        };
        let input = RewardInput {
            prev: &w,
            cur: &w,
            action: &a2,
            prev_action: &a1,
            prev_prev_action: &a0,
            contact_local: Vec2::ZERO,
        };
        let r = compute_reward(&input, &EpisodeConfig::default(), &RewardConfig::default());
        assert_abs_diff_eq!(r.terms[4], -0.04, epsilon = 1e-12);
        assert_abs_diff_eq!(r.terms[5], -0.05, epsilon = 1e-12);
    }

    #[test]
    fn collision_beats_success() {
        let mut w = world(Pose2D::new(3.0, 0.0, 0.0), Pose2D::new(3.0, 0.0, 0.0));
        w.obstacles.push(OrientedRect::square(Pose2D::new(3.9, 0.0, 0.0), 0.8));
        let t = check_termination(&w, &EpisodeConfig::default());
        assert!(t.collision && !t.success && t.terminal());
    }

    #[test]
    fn base_disc_collision() {
        let mut w = world(Pose2D::new(3.0, 0.0, 0.0), Pose2D::new(10.0, 0.0, 0.0));
        // Base at x = 1.3; obstacle edge 0.35 m from the base center.
        w.obstacles.push(OrientedRect::square(Pose2D::new(1.3, -0.55, 0.0), 0.4));
        assert!(in_collision(&w, 0.4));
        assert!(!in_collision(&w, 0.3));
    }
}
