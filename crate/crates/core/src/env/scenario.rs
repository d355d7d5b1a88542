//! Initial scene sampling and the dynamic-obstacle schedule.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;

use crate::geometry::{disc_overlap, rect_overlap, OrientedRect, Pose2D, Vec2, WorldState};

use super::config::{EpisodeConfig, ObstacleCount, Region, Scenario};

/// One obstacle that will appear mid-episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduledObstacle {
    pub time: f64,
    pub size: f64,
    pub yaw: f64,
    /// First candidate position; re-draws happen only if this is blocked.
    pub position: Vec2,
}

/// Time-ordered obstacle schedule fixed at reset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObstacleSchedule {
    pub entries: Vec<ScheduledObstacle>,
    /// Placement rule used for re-draws.
    pub scenario: Option<Scenario>,
    next: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpawnEvent {
    Spawned {
        index: usize,
        rect: OrientedRect,
        attempts: usize,
    },
    /// Every candidate position conflicted with the robot, object or another
    /// obstacle; the obstacle is dropped for this episode.
    Skipped { index: usize, attempts: usize },
}

impl ObstacleSchedule {
    pub fn new(mut entries: Vec<ScheduledObstacle>, scenario: Scenario) -> Self {
        entries.sort_by(|a, b| a.time.total_cmp(&b.time));
        ObstacleSchedule {
            entries,
            scenario: Some(scenario),
            next: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries not yet processed.
    pub fn pending(&self) -> &[ScheduledObstacle] {
        &self.entries[self.next..]
    }

    /// Stable fingerprint of the schedule, used to check pairing across variants.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.entries.len().hash(&mut h);
        for e in &self.entries {
            for v in [e.time, e.size, e.yaw, e.position.x, e.position.y] {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    pub fn scenario(&self) -> Option<Scenario> {
        self.scenario
    }
}

fn uniform_in<R: Rng + ?Sized>(rng: &mut R, r: &Region) -> Vec2 {
    Vec2::new(rng.random_range(r.min.x..=r.max.x), rng.random_range(r.min.y..=r.max.y))
}

/// Candidate obstacle center for `scenario`.
pub fn draw_obstacle_position<R: Rng + ?Sized>(
    cfg: &EpisodeConfig,
    scenario: Scenario,
    object_start: Vec2,
    goal: Vec2,
    rng: &mut R,
) -> Vec2 {
    let s = cfg.world_scale;
    let (near, far) = (cfg.spawn_band.0 * s, cfg.spawn_band.1 * s);
    match scenario {
        Scenario::Uniform => {
            let half = cfg.spawn_half_width();
            Vec2::new(
                object_start.x + rng.random_range(near..=far),
                rng.random_range(-half..=half),
            )
        }
        Scenario::Adversarial | Scenario::Mixed => {
            let path = goal - object_start;
            let len = path.norm();
            let dir = path * (1.0 / len);
            let along = rng.random_range(near..=far.min(len));
            let lateral = rng.random_range(-0.5..=0.5) * cfg.object_size;
            object_start + dir * along + dir.perp() * lateral
        }
    }
}

/// Initial scene plus obstacle schedule.
pub struct SampledEpisode {
    /// Concrete scenario of this episode (never `Mixed`).
    pub scenario: Scenario,
    pub world: WorldState,
    pub schedule: ObstacleSchedule,
    /// Designated contact point on the object's rear face, object frame.
    pub contact_local: Vec2,
}

/// Draws an episode. All randomness comes from `rng` in a fixed order, so
/// two variants reset with the same seed see identical scenes and schedules.
pub fn sample_episode<R: Rng + ?Sized>(cfg: &EpisodeConfig, base_only: bool, rng: &mut R) -> SampledEpisode {
    let start = uniform_in(rng, &cfg.start_region());
    let goal = uniform_in(rng, &cfg.goal_region());
    let half = 0.5 * cfg.object_size;
    let object = OrientedRect::square(Pose2D::new(start.x, start.y, 0.0), cfg.object_size);

    let contact_local = Vec2::new(-half, rng.random_range(-half..=half));
    let scenario = match cfg.scenario {
        Scenario::Mixed => {
            if rng.random_bool(0.5) {
                Scenario::Uniform
            } else {
                Scenario::Adversarial
            }
        }
        s => s,
    };

    let count = match cfg.obstacle_count {
        ObstacleCount::Fixed(n) => n,
        ObstacleCount::Random { max } => rng.random_range(0..=max),
    };
    let horizon = cfg.spawn_time_fraction * cfg.timeout;
    let entries = (0..count)
        .map(|_| {
            let time = rng.random_range(0.0..=horizon);
            let size = cfg.obstacle_sizes[rng.random_range(0..cfg.obstacle_sizes.len())];
            let yaw = rng.random_range(0.0..std::f64::consts::FRAC_PI_2);
            let position = draw_obstacle_position(cfg, scenario, start, goal, rng);
            ScheduledObstacle {
                time,
                size,
                yaw,
                position,
            }
        })
        .collect();

    // The pusher starts touching the center of the rear face; the base sits
    // behind it facing the object.
    let pusher = Vec2::new(start.x - half, start.y);
    let offset = if base_only { cfg.base_only_offset } else { cfg.reach_radius };
    let base = Pose2D::new(pusher.x - offset, pusher.y, 0.0);

    SampledEpisode {
        scenario,
        world: WorldState {
            base,
            pusher,
            object,
            obstacles: Vec::new(),
            goal: Pose2D::new(goal.x, goal.y, 0.0),
            sim_time: 0.0,
        },
        schedule: ObstacleSchedule::new(entries, scenario),
        contact_local,
    }
}

/// Whether `rect` keeps the spawn clearance from the robot, the object and
/// every existing obstacle.
pub fn spawn_is_clear(world: &WorldState, rect: &OrientedRect, cfg: &EpisodeConfig) -> bool {
    let inflated = rect.inflated(cfg.spawn_clearance);
    !rect_overlap(&inflated, &world.object)
        && !disc_overlap(world.base.position(), cfg.base_radius, &inflated)
        && !disc_overlap(world.pusher, cfg.pusher_radius, &inflated)
        && !world.obstacles.iter().any(|o| rect_overlap(rect, o))
}

/// Activates every scheduled obstacle whose time has come. Blocked
/// candidates are re-drawn from `rng` up to `spawn_attempts` draws in total.
pub fn spawn_due<R: Rng + ?Sized>(
    world: &mut WorldState,
    schedule: &mut ObstacleSchedule,
    object_start: Vec2,
    cfg: &EpisodeConfig,
    rng: &mut R,
) -> Vec<SpawnEvent> {
    let mut events = Vec::new();
    while schedule.next < schedule.entries.len() && schedule.entries[schedule.next].time <= world.sim_time + 1e-9 {
        let index = schedule.next;
        let entry = schedule.entries[index];
        schedule.next += 1;
        let mut position = entry.position;
        let mut placed = None;
        for attempt in 1..=cfg.spawn_attempts {
            if attempt > 1 {
                let scenario = schedule.scenario.unwrap_or(cfg.scenario);
                position = draw_obstacle_position(cfg, scenario, object_start, world.goal.position(), rng);
            }
            let rect = OrientedRect::square(Pose2D::new(position.x, position.y, entry.yaw), entry.size);
            if spawn_is_clear(world, &rect, cfg) {
                placed = Some((rect, attempt));
                break;
            }
        }
        match placed {
            Some((rect, attempts)) => {
                world.obstacles.push(rect);
                events.push(SpawnEvent::Spawned { index, rect, attempts });
            }
            None => events.push(SpawnEvent::Skipped {
                index,
                attempts: cfg.spawn_attempts,
            }),
        }
    }
    events
}
