//! Base-frame policy observation and its fixed feature scaling.

use crate::geometry::{normalize_angle, Action, KinematicLimits, Pose2D, Vec2, WorldState};

/// Length scale for base-frame positions of nearby bodies.
pub const NEAR_SCALE: f64 = 5.0;
/// Length scale for the goal position.
pub const GOAL_SCALE: f64 = 10.0;
/// Length scale of the squashed object-to-goal offset. It resolves the last
/// few decimetres of placement that `GOAL_SCALE` flattens.
pub const OFFSET_SCALE: f64 = 1.0;
/// Number of non-latent features.
pub const PROPRIO_DIM: usize = 24;

/// Typed observation; every pose and velocity is in the current base frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub pusher_position: Vec2,
    pub pusher_velocity: Vec2,
    pub base_velocity: Vec2,
    /// Previous commanded action, normalised to `[-1, 1]` per limit.
    pub prev_action: [f64; 4],
    pub object_pose: Pose2D,
    pub object_velocity: Vec2,
    pub object_yaw_rate: f64,
    pub goal_pose: Pose2D,
    /// Goal position minus object position (base frame) and goal yaw minus
    /// object yaw.
    pub goal_offset: Pose2D,
    /// Map latent, or zeros when the variant has no map input.
    pub latent: Vec<f64>,
}

pub fn feature_dim(latent_dim: usize) -> usize {
    PROPRIO_DIM + latent_dim
}

impl Observation {
    pub fn build(
        world: &WorldState,
        prev_world: &WorldState,
        prev_action: &Action,
        latent: Vec<f64>,
        dt: f64,
        limits: &KinematicLimits,
    ) -> Observation {
        let base = world.base;
        let yaw = base.yaw;
        let to_base = |v: Vec2| v.rotate(-yaw);
        let pusher_velocity = to_base((world.pusher - prev_world.pusher) * (1.0 / dt));
        let base_velocity = to_base((world.base.position() - prev_world.base.position()) * (1.0 / dt));
        let object_velocity = to_base((world.object.center() - prev_world.object.center()) * (1.0 / dt));
        let object_yaw_rate = normalize_angle(world.object.pose.yaw - prev_world.object.pose.yaw) / dt;
        let a = prev_action.as_array();
        let goal_offset = to_base(world.goal.position() - world.object.center());
        Observation {
            pusher_position: base.inverse_transform_point(world.pusher),
            pusher_velocity,
            base_velocity,
            prev_action: [
                a[0] / limits.v_max,
                a[1] / limits.v_max,
                a[2] / limits.pusher_v_max,
                a[3] / limits.pusher_v_max,
            ],
            object_pose: base.relative(&world.object.pose),
            object_velocity,
            object_yaw_rate,
            goal_pose: base.relative(&world.goal),
            goal_offset: Pose2D::new(
                goal_offset.x,
                goal_offset.y,
                normalize_angle(world.goal.yaw - world.object.pose.yaw),
            ),
            latent,
        }
    }

    /// Flat scaled feature vector of length `feature_dim(latent.len())`.
    pub fn to_features(&self, limits: &KinematicLimits) -> Vec<f64> {
        let v = limits.v_max;
        let mut f = Vec::with_capacity(feature_dim(self.latent.len()));
        f.extend_from_slice(&[
            self.pusher_position.x / NEAR_SCALE,
            self.pusher_position.y / NEAR_SCALE,
            self.pusher_velocity.x / limits.pusher_v_max,
            self.pusher_velocity.y / limits.pusher_v_max,
            self.base_velocity.x / v,
            self.base_velocity.y / v,
        ]);
        f.extend_from_slice(&self.prev_action);
        f.extend_from_slice(&[
            self.object_pose.x / NEAR_SCALE,
            self.object_pose.y / NEAR_SCALE,
            self.object_pose.yaw.cos(),
            self.object_pose.yaw.sin(),
            self.object_velocity.x / v,
            self.object_velocity.y / v,
            self.object_yaw_rate,
            self.goal_pose.x / GOAL_SCALE,
            self.goal_pose.y / GOAL_SCALE,
            self.goal_pose.yaw.cos(),
            self.goal_pose.yaw.sin(),
            (self.goal_offset.x / OFFSET_SCALE).tanh(),
            (self.goal_offset.y / OFFSET_SCALE).tanh(),
            self.goal_offset.yaw.sin(),
        ]);
        f.extend_from_slice(&self.latent);
        f
    }
}
