//! Planar rigid-body substrate: poses, oriented rectangles, separating-axis
//! overlap, exact ray casting and the quasi-static point-push step.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use crate::error::{CuraError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn from_angle(angle: f64) -> Self {
        Vec2::new(angle.cos(), angle.sin())
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn rotate(self, angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Rescales to at most `max_norm`, keeping direction.
    pub fn clamp_norm(self, max_norm: f64) -> Vec2 {
        let n = self.norm();
        if n > max_norm && n > 0.0 {
            self * (max_norm / n)
        } else {
            self
        }
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (-π, π].
pub fn normalize_angle(angle: f64) -> f64 {
    let mut a = angle % (2.0 * PI);
    if a <= -PI {
        a += 2.0 * PI;
    } else if a > PI {
        a -= 2.0 * PI;
    }
    a
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Pose2D {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
}

impl Pose2D {
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Pose2D {
            x,
            y,
            yaw: normalize_angle(yaw),
        }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Maps a point from this pose's local frame into the parent frame.
    pub fn transform_point(&self, local: Vec2) -> Vec2 {
        self.position() + local.rotate(self.yaw)
    }

    /// Maps a parent-frame point into this pose's local frame.
    pub fn inverse_transform_point(&self, world: Vec2) -> Vec2 {
        (world - self.position()).rotate(-self.yaw)
    }

    /// Expresses `other` relative to this pose.
    pub fn relative(&self, other: &Pose2D) -> Pose2D {
        let p = self.inverse_transform_point(other.position());
        Pose2D::new(p.x, p.y, other.yaw - self.yaw)
    }
}

/// Rectangle with half extents along its local axes: `half_depth` along local
/// x, `half_width` along local y.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub pose: Pose2D,
    pub half_width: f64,
    pub half_depth: f64,
}

impl OrientedRect {
    pub fn new(pose: Pose2D, half_width: f64, half_depth: f64) -> Self {
        assert!(
            half_width > 0.0 && half_depth > 0.0,
            "rectangle half extents must be positive"
        );
        OrientedRect {
            pose,
            half_width,
            half_depth,
        }
    }

    /// Axis-aligned-in-local-frame square of side `size`.
    pub fn square(pose: Pose2D, size: f64) -> Self {
        OrientedRect::new(pose, 0.5 * size, 0.5 * size)
    }

    pub fn center(&self) -> Vec2 {
        self.pose.position()
    }

    pub fn half_diagonal(&self) -> f64 {
        self.half_width.hypot(self.half_depth)
    }

    /// Corners in counter-clockwise order, starting at local (+d, -w).
    pub fn corners(&self) -> [Vec2; 4] {
        let (d, w) = (self.half_depth, self.half_width);
        [
            Vec2::new(d, -w),
            Vec2::new(d, w),
            Vec2::new(-d, w),
            Vec2::new(-d, -w),
        ]
        .map(|c| self.pose.transform_point(c))
    }

    fn axes(&self) -> [Vec2; 2] {
        let ux = Vec2::from_angle(self.pose.yaw);
        [ux, ux.perp()]
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let l = self.pose.inverse_transform_point(p);
        l.x.abs() <= self.half_depth && l.y.abs() <= self.half_width
    }

    /// Euclidean distance from `p` to the rectangle (0 inside).
    pub fn distance_to_point(&self, p: Vec2) -> f64 {
        let l = self.pose.inverse_transform_point(p);
        let dx = (l.x.abs() - self.half_depth).max(0.0);
        let dy = (l.y.abs() - self.half_width).max(0.0);
        dx.hypot(dy)
    }

    /// Same pose, extents grown by `margin` on every side.
    pub fn inflated(&self, margin: f64) -> OrientedRect {
        OrientedRect::new(
            self.pose,
            self.half_width + margin,
            self.half_depth + margin,
        )
    }
}

/// Separating-axis overlap test over the four edge normals. Touching counts as overlap.
pub fn rect_overlap(a: &OrientedRect, b: &OrientedRect) -> bool {
    let ca = a.corners();
    let cb = b.corners();
    for axis in a.axes().into_iter().chain(b.axes()) {
        let (min_a, max_a) = project(&ca, axis);
        let (min_b, max_b) = project(&cb, axis);
        if max_a < min_b || max_b < min_a {
            return false;
        }
    }
    true
}

fn project(points: &[Vec2; 4], axis: Vec2) -> (f64, f64) {
    points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
        let q = p.dot(axis);
        (lo.min(q), hi.max(q))
    })
}

/// True when a disc overlaps (or touches) the rectangle.
pub fn disc_overlap(center: Vec2, radius: f64, rect: &OrientedRect) -> bool {
    rect.distance_to_point(center) <= radius
}

/// Entry distance of a ray into a rectangle, or `None` on a miss. Returns 0
/// when the origin lies inside or on the boundary.
pub fn ray_rect_distance(origin: Vec2, dir: Vec2, rect: &OrientedRect) -> Option<f64> {
    slab_entry(origin, dir, rect).map(|(t, _)| t)
}

/// Slab intersection in the rectangle frame. Returns the entry parameter and
/// the local axis (0 = x, 1 = y) whose slab produced it.
fn slab_entry(origin: Vec2, dir: Vec2, rect: &OrientedRect) -> Option<(f64, usize)> {
    let o = rect.pose.inverse_transform_point(origin);
    let d = dir.rotate(-rect.pose.yaw);
    let ext = [rect.half_depth, rect.half_width];
    let oc = [o.x, o.y];
    let dc = [d.x, d.y];

    let mut t_enter = f64::NEG_INFINITY;
    let mut enter_axis = 0;
    let mut t_exit = f64::INFINITY;
    for k in 0..2 {
        if dc[k].abs() < 1e-15 {
            if oc[k].abs() > ext[k] {
                return None;
            }
            continue;
        }
        let t1 = (-ext[k] - oc[k]) / dc[k];
        let t2 = (ext[k] - oc[k]) / dc[k];
        let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
        if lo > t_enter {
            t_enter = lo;
            enter_axis = k;
        }
        t_exit = t_exit.min(hi);
    }
    if t_exit < t_enter.max(0.0) {
        return None;
    }
    Some((t_enter.max(0.0), enter_axis))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub distance: f64,
    pub hit_index: Option<usize>,
}

/// Casts a ray against `bodies` and returns the nearest boundary hit, or
/// `max_range` with no index when nothing is hit within range.
pub fn ray_cast(origin: Vec2, angle: f64, bodies: &[OrientedRect], max_range: f64) -> RayHit {
    let dir = Vec2::from_angle(angle);
    let mut best = RayHit {
        distance: max_range,
        hit_index: None,
    };
    for (i, body) in bodies.iter().enumerate() {
        if let Some(t) = ray_rect_distance(origin, dir, body) {
            if t <= max_range && (best.hit_index.is_none() || t < best.distance) {
                best = RayHit {
                    distance: t,
                    hit_index: Some(i),
                };
            }
        }
    }
    best
}

/// Commanded planar velocities, both expressed in the base frame. The pusher
/// command is relative to the base, so a zero pusher command keeps the
/// base-to-pusher offset fixed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Action {
    pub base_velocity: Vec2,
    pub pusher_velocity: Vec2,
}

impl Action {
    pub fn clamped(&self, limits: &KinematicLimits) -> Action {
        Action {
            base_velocity: self.base_velocity.clamp_norm(limits.v_max),
            pusher_velocity: self.pusher_velocity.clamp_norm(limits.pusher_v_max),
        }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [
            self.base_velocity.x,
            self.base_velocity.y,
            self.pusher_velocity.x,
            self.pusher_velocity.y,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KinematicLimits {
    /// Maximum base speed, also the object speed cap (m/s).
    pub v_max: f64,
    pub pusher_v_max: f64,
    pub reach_radius: f64,
}

impl Default for KinematicLimits {
    fn default() -> Self {
        KinematicLimits {
            v_max: 0.8,
            pusher_v_max: 1.0,
            reach_radius: 1.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub base: Pose2D,
    pub pusher: Vec2,
    pub object: OrientedRect,
    pub obstacles: Vec<OrientedRect>,
    pub goal: Pose2D,
    pub sim_time: f64,
}

impl WorldState {
    /// The goal footprint: the object's extents placed at the goal pose.
    pub fn goal_rect(&self) -> OrientedRect {
        OrientedRect::new(self.goal, self.object.half_width, self.object.half_depth)
    }

    /// Applies a rigid transform (rotation about the origin, then translation)
    /// to every pose in the scene.
    pub fn transformed(&self, rotation: f64, translation: Vec2) -> WorldState {
        let tp = |p: &Pose2D| {
            let q = p.position().rotate(rotation) + translation;
            Pose2D::new(q.x, q.y, p.yaw + rotation)
        };
        let tr = |r: &OrientedRect| OrientedRect::new(tp(&r.pose), r.half_width, r.half_depth);
        WorldState {
            base: tp(&self.base),
            pusher: self.pusher.rotate(rotation) + translation,
            object: tr(&self.object),
            obstacles: self.obstacles.iter().map(tr).collect(),
            goal: tp(&self.goal),
            sim_time: self.sim_time,
        }
    }

    /// One trace line: fixed field order, `decimals` places, or exact
    /// round-trip formatting when `decimals` is `None`.
    ///
    /// `t bx by byaw px py ox oy oyaw ohw ohd gx gy gyaw n [x y yaw hw hd]*n`
    pub fn to_trace_line(&self, decimals: Option<usize>) -> String {
        let mut fields = vec![
            self.sim_time,
            self.base.x,
            self.base.y,
            self.base.yaw,
            self.pusher.x,
            self.pusher.y,
            self.object.pose.x,
            self.object.pose.y,
            self.object.pose.yaw,
            self.object.half_width,
            self.object.half_depth,
            self.goal.x,
            self.goal.y,
            self.goal.yaw,
        ];
        let mut line = String::new();
        let fmt = |line: &mut String, v: f64| match decimals {
            Some(d) => write!(line, "{v:.d$}").unwrap(),
            None => write!(line, "{v:e}").unwrap(),
        };
        for v in fields.drain(..) {
            fmt(&mut line, v);
            line.push(' ');
        }
        write!(line, "{}", self.obstacles.len()).unwrap();
        for o in &self.obstacles {
            for v in [o.pose.x, o.pose.y, o.pose.yaw, o.half_width, o.half_depth] {
                line.push(' ');
                fmt(&mut line, v);
            }
        }
        line
    }

    /// Parses a line written by [`WorldState::to_trace_line`]. Trailing
    /// columns after the obstacle block are ignored.
    pub fn from_trace_line(line: &str, line_no: usize) -> Result<WorldState> {
        let err = |reason: &str| CuraError::Trace {
            line: line_no,
            reason: reason.to_string(),
        };
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() < 15 {
            return Err(err("too few fields"));
        }
        let num = |i: usize| -> Result<f64> {
            tokens
                .get(i)
                .ok_or_else(|| err("missing field"))?
                .parse::<f64>()
                .map_err(|_| err("bad number"))
        };
        let n: usize = tokens[14].parse().map_err(|_| err("bad obstacle count"))?;
        let mut obstacles = Vec::with_capacity(n);
        for k in 0..n {
            let b = 15 + 5 * k;
            obstacles.push(OrientedRect::new(
                Pose2D::new(num(b)?, num(b + 1)?, num(b + 2)?),
                num(b + 3)?,
                num(b + 4)?,
            ));
        }
        Ok(WorldState {
            sim_time: num(0)?,
            base: Pose2D::new(num(1)?, num(2)?, num(3)?),
            pusher: Vec2::new(num(4)?, num(5)?),
            object: OrientedRect::new(Pose2D::new(num(6)?, num(7)?, num(8)?), num(9)?, num(10)?),
            goal: Pose2D::new(num(11)?, num(12)?, num(13)?),
            obstacles,
        })
    }
}

/// Face of the object the pusher is pressing, as an outward unit normal and
/// the offset of the face plane along it.
struct ContactFace {
    outward: Vec2,
    extent: f64,
    tangent_extent: f64,
}

fn contact_face(object: &OrientedRect, start: Vec2, end: Vec2) -> Option<ContactFace> {
    let face_for = |axis: usize, sign: f64| {
        let local = if axis == 0 {
            Vec2::new(sign, 0.0)
        } else {
            Vec2::new(0.0, sign)
        };
        let (extent, tangent_extent) = if axis == 0 {
            (object.half_depth, object.half_width)
        } else {
            (object.half_width, object.half_depth)
        };
        ContactFace {
            outward: local.rotate(object.pose.yaw),
            extent,
            tangent_extent,
        }
    };

    let ls = object.pose.inverse_transform_point(start);
    if object.contains(start) {
        // Started in contact (or slightly embedded): the face with the least
        // penetration depth carries the push.
        let gap_x = object.half_depth - ls.x.abs();
        let gap_y = object.half_width - ls.y.abs();
        return Some(if gap_x <= gap_y {
            face_for(0, ls.x.signum())
        } else {
            face_for(1, ls.y.signum())
        });
    }
    let seg = end - start;
    let len = seg.norm();
    if len == 0.0 {
        return None;
    }
    let (t, axis) = slab_entry(start, seg * (1.0 / len), object)?;
    if t > len {
        return None;
    }
    let entry = object.pose.inverse_transform_point(start + seg * (t / len));
    let sign = if axis == 0 { entry.x.signum() } else { entry.y.signum() };
    Some(face_for(axis, sign))
}

/// Advances the scene by one explicit-Euler step of `dt`.
///
/// Base and pusher integrate their commands (pusher relative to the base and
/// clamped to `reach_radius` of the new base position). If the pusher sweeps
/// into the object, the object translates along the inward face normal by the
/// penetration depth (capped at `v_max * dt`) and rotates by
/// `(r × push) / half_diagonal²`, with `r` the contact point relative to the
/// object center. Collision flags are not evaluated here.
pub fn step_kinematics(
    state: &WorldState,
    action: &Action,
    dt: f64,
    limits: &KinematicLimits,
) -> WorldState {
    let action = action.clamped(limits);
    let yaw = state.base.yaw;
    let base_disp = action.base_velocity.rotate(yaw) * dt;
    let base_pos = state.base.position() + base_disp;
    let base = Pose2D::new(base_pos.x, base_pos.y, yaw);

    let mut pusher = state.pusher + base_disp + action.pusher_velocity.rotate(yaw) * dt;
    let offset = pusher - base_pos;
    if offset.norm() > limits.reach_radius {
        pusher = base_pos + offset * (limits.reach_radius / offset.norm());
    }

    let mut object = state.object;
    if let Some(face) = contact_face(&state.object, state.pusher, pusher) {
        let inward = -face.outward;
        let face_point = object.center() + face.outward * face.extent;
        let depth = (pusher - face_point).dot(inward);
        if depth > 0.0 {
            let push = (inward * depth).clamp_norm(limits.v_max * dt);
            let tangent = face.outward.perp();
            let along = (pusher - face_point)
                .dot(tangent)
                .clamp(-face.tangent_extent, face.tangent_extent);
            let contact = face_point + tangent * along;
            let lever = contact - object.center();
            let h = object.half_diagonal();
            let dtheta = lever.cross(push) / (h * h);
            let c = object.center() + push;
            object.pose = Pose2D::new(c.x, c.y, object.pose.yaw + dtheta);
        }
    }

    WorldState {
        base,
        pusher,
        object,
        obstacles: state.obstacles.clone(),
        goal: state.goal,
        sim_time: state.sim_time + dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_4;

    fn unit(x: f64, y: f64, yaw: f64) -> OrientedRect {
        OrientedRect::new(Pose2D::new(x, y, yaw), 0.5, 0.5)
    }

    #[test]
    fn normalize_angle_range() {
        assert_abs_diff_eq!(normalize_angle(PI), PI);
        assert_abs_diff_eq!(normalize_angle(-PI), PI);
        assert_abs_diff_eq!(normalize_angle(3.0 * PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(normalize_angle(0.5), 0.5);
    }

    #[test]
    fn corners_are_counter_clockwise() {
        let r = OrientedRect::new(Pose2D::new(1.0, -2.0, 0.7), 0.3, 0.8);
        let c = r.corners();
        let area2: f64 = (0..4).map(|i| c[i].cross(c[(i + 1) % 4])).sum();
        assert!(area2 > 0.0);
        assert_abs_diff_eq!(area2 * 0.5, 4.0 * 0.3 * 0.8, epsilon = 1e-12);
    }

    #[test]
    fn identical_and_disjoint_squares() {
        assert!(rect_overlap(&unit(0.0, 0.0, 0.0), &unit(0.0, 0.0, 0.0)));
        assert!(!rect_overlap(&unit(0.0, 0.0, 0.0), &unit(10.0, 0.0, 0.0)));
    }

    #[test]
    fn touching_counts_as_overlap() {
        assert!(rect_overlap(&unit(0.0, 0.0, 0.0), &unit(1.0, 0.0, 0.0)));
        assert!(!rect_overlap(&unit(0.0, 0.0, 0.0), &unit(1.0 + 1e-9, 0.0, 0.0)));
    }

    #[test]
    fn rotated_square_near_miss_matches_point_sampling() {
        // Boundary sampling oracle: overlap iff some boundary point of one
        // lies inside the other (valid for convex shapes that do not nest).
        let a = unit(0.0, 0.0, 0.0);
        let b = unit(0.99, 0.0, FRAC_PI_4);
        let sample = |r: &OrientedRect, other: &OrientedRect| {
            let c = r.corners();
            (0..4).any(|e| {
                (0..2500).any(|k| {
                    let s = k as f64 / 2500.0;
                    other.contains(c[e] + (c[(e + 1) % 4] - c[e]) * s)
                })
            })
        };
        let oracle = sample(&a, &b) || sample(&b, &a);
        assert_eq!(rect_overlap(&a, &b), oracle);
        assert!(oracle);
    }

    #[test]
    fn ray_hits_axis_aligned_square() {
        let hit = ray_cast(Vec2::ZERO, 0.0, &[unit(5.0, 0.0, 0.0)], 20.0);
        assert_abs_diff_eq!(hit.distance, 4.5, epsilon = 1e-12);
        assert_eq!(hit.hit_index, Some(0));
    }

    #[test]
    fn ray_in_empty_scene() {
        let hit = ray_cast(Vec2::new(1.0, 2.0), 1.0, &[], 8.0);
        assert_eq!(hit, RayHit { distance: 8.0, hit_index: None });
    }

    #[test]
    fn ray_origin_inside_body() {
        let hit = ray_cast(Vec2::new(0.1, 0.1), 2.0, &[unit(0.0, 0.0, 0.3)], 8.0);
        assert_eq!(hit.distance, 0.0);
        assert_eq!(hit.hit_index, Some(0));
    }

    #[test]
    fn ray_out_of_range_is_a_miss() {
        let hit = ray_cast(Vec2::ZERO, 0.0, &[unit(5.0, 0.0, 0.0)], 4.0);
        assert_eq!(hit.hit_index, None);
        assert_eq!(hit.distance, 4.0);
    }

    #[test]
    fn nearest_body_wins() {
        let bodies = [unit(6.0, 0.0, 0.0), unit(3.0, 0.0, 0.2)];
        let hit = ray_cast(Vec2::ZERO, 0.0, &bodies, 20.0);
        assert_eq!(hit.hit_index, Some(1));
    }

    fn scene() -> WorldState {
        WorldState {
            base: Pose2D::new(-1.7, 0.0, 0.0),
            pusher: Vec2::new(-0.5, 0.0),
            object: unit(0.0, 0.0, 0.0),
            obstacles: vec![unit(5.0, 2.0, 0.3)],
            goal: Pose2D::new(12.0, 0.0, 0.0),
            sim_time: 0.0,
        }
    }

    #[test]
    fn zero_action_only_advances_time() {
        let s = scene();
        let n = step_kinematics(&s, &Action::default(), 0.2, &KinematicLimits::default());
        assert_eq!(n.base, s.base);
        assert_eq!(n.pusher, s.pusher);
        assert_eq!(n.object, s.object);
        assert_eq!(n.obstacles, s.obstacles);
        assert_abs_diff_eq!(n.sim_time, 0.2);
    }

    #[test]
    fn center_push_translates_without_rotation() {
        let s = scene();
        // The arm is at full reach, so the base carries the pusher forward.
        let a = Action {
            base_velocity: Vec2::new(0.5, 0.0),
            pusher_velocity: Vec2::ZERO,
        };
        let n = step_kinematics(&s, &a, 0.2, &KinematicLimits::default());
        assert_abs_diff_eq!(n.object.pose.x, 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(n.object.pose.y, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(n.object.pose.yaw, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn pusher_respects_reach() {
        let s = scene();
        let a = Action {
            base_velocity: Vec2::new(-0.8, 0.0),
            pusher_velocity: Vec2::new(1.0, 0.0),
        };
        let limits = KinematicLimits::default();
        let n = step_kinematics(&s, &a, 0.2, &limits);
        assert!((n.pusher - n.base.position()).norm() <= limits.reach_radius + 1e-12);
    }

    #[test]
    fn trace_round_trip_exact() {
        let s = scene();
        let line = s.to_trace_line(None);
        let back = WorldState::from_trace_line(&line, 1).unwrap();
        assert_eq!(back, s);
        let six = s.to_trace_line(Some(6));
        assert!(six.starts_with("0.000000 -1.700000 0.000000"));
    }

    #[test]
    fn trace_rejects_garbage() {
        assert!(WorldState::from_trace_line("1 2 3", 4).is_err());
    }
}
