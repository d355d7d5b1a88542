//! The pushing task as a resettable, seedable environment.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CuraError, Result};
use crate::geometry::{step_kinematics, Action, Vec2, WorldState};
use crate::perception::{simulate_lidar, ConfidenceMap, LidarScan, MapEncoder, OcclusionMode};

use super::config::{EpisodeConfig, RewardConfig};
use super::observation::{feature_dim, Observation};
use super::reward::{check_termination, compute_reward, RewardBreakdown, RewardInput, Termination};
use super::scenario::{sample_episode, spawn_due, ObstacleSchedule, SpawnEvent};

/// Action dimension: base (vx, vy) then pusher (vx, vy), both normalised.
pub const ACTION_DIM: usize = 4;

/// Margin added around the workspace when sizing the confidence map.
const MAP_MARGIN: f64 = 2.0;

/// Per-variant switches of the environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnvOptions {
    pub occlusion: OcclusionMode,
    /// Feed the map latent to the policy; otherwise the latent slot is zero.
    pub use_latent: bool,
    /// Disable the arm: the pusher stays at a fixed offset from the base.
    pub base_only: bool,
}

impl Default for EnvOptions {
    fn default() -> Self {
        EnvOptions {
            occlusion: OcclusionMode::Realistic,
            use_latent: true,
            base_only: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StepResult {
    pub observation: Observation,
    /// Sum of the weighted terms, plus the success bonus on a success step.
    pub reward: f64,
    pub breakdown: RewardBreakdown,
    pub termination: Termination,
    /// The physical command that was executed.
    pub action: Action,
    pub spawn_events: Vec<SpawnEvent>,
}

impl StepResult {
    pub fn terminal(&self) -> bool {
        self.termination.terminal()
    }
}

pub struct PushEnv {
    cfg: EpisodeConfig,
    reward_cfg: RewardConfig,
    opts: EnvOptions,
    encoder: Arc<MapEncoder>,
    world: WorldState,
    prev_world: WorldState,
    map: ConfidenceMap,
    scan: Option<LidarScan>,
    schedule: ObstacleSchedule,
    spawn_rng: ChaCha8Rng,
    object_start: Vec2,
    contact_local: Vec2,
    prev_action: Action,
    prev_prev_action: Action,
    observation: Option<Observation>,
    steps: usize,
    done: bool,
    spawn_log: Vec<SpawnEvent>,
}

impl PushEnv {
    pub fn new(cfg: EpisodeConfig, reward_cfg: RewardConfig, opts: EnvOptions, encoder: Arc<MapEncoder>) -> Result<Self> {
        cfg.validate()?;
        let ws = cfg.workspace();
        let margin = Vec2::new(MAP_MARGIN, MAP_MARGIN);
        let map = ConfidenceMap::covering(ws.min - margin, ws.max + margin, cfg.map_resolution);
        let mut env = PushEnv {
            reward_cfg,
            opts,
            encoder,
            world: placeholder_world(),
            prev_world: placeholder_world(),
            map,
            scan: None,
            schedule: ObstacleSchedule::default(),
            spawn_rng: ChaCha8Rng::seed_from_u64(0),
            object_start: Vec2::ZERO,
            contact_local: Vec2::ZERO,
            prev_action: Action::default(),
            prev_prev_action: Action::default(),
            observation: None,
            steps: 0,
            done: true,
            spawn_log: Vec::new(),
            cfg,
        };
        env.reset(0);
        Ok(env)
    }

    pub fn config(&self) -> &EpisodeConfig {
        &self.cfg
    }

    pub fn options(&self) -> &EnvOptions {
        &self.opts
    }

    pub fn feature_dim(&self) -> usize {
        feature_dim(self.encoder.latent_dim())
    }

    /// Starts a new episode. Scene and obstacle schedule depend only on
    /// `seed` and the episode config, never on the variant options.
    pub fn reset(&mut self, seed: u64) -> Observation {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ep = sample_episode(&self.cfg, self.opts.base_only, &mut rng);
        self.spawn_rng = ChaCha8Rng::seed_from_u64(seed);
        self.spawn_rng.set_stream(1);
        self.world = ep.world;
        self.schedule = ep.schedule;
        self.contact_local = ep.contact_local;
        self.object_start = self.world.object.center();
        self.prev_action = Action::default();
        self.prev_prev_action = Action::default();
        self.steps = 0;
        self.done = false;
        self.map.reset();
        self.spawn_log = spawn_due(
            &mut self.world,
            &mut self.schedule,
            self.object_start,
            &self.cfg,
            &mut self.spawn_rng,
        );
        self.prev_world = self.world.clone();
        let obs = self.sense();
        self.observation = Some(obs.clone());
        obs
    }

    /// Maps a normalised policy output to a physical command. Components are
    /// clipped to `[-1, 1]` first; the pusher command is zero without an arm.
    pub fn action_from_normalized(&self, a: &[f64]) -> Action {
        let c = |x: f64| x.clamp(-1.0, 1.0);
        let pusher = if self.opts.base_only {
            Vec2::ZERO
        } else {
            Vec2::new(c(a[2]), c(a[3])) * self.cfg.pusher_v_max
        };
        Action {
            base_velocity: Vec2::new(c(a[0]), c(a[1])) * self.cfg.v_max,
            pusher_velocity: pusher,
        }
        .clamped(&self.cfg.limits())
    }

    pub fn step(&mut self, normalized_action: &[f64]) -> Result<StepResult> {
        if self.done {
            return Err(CuraError::config("env", "step called on a finished episode; reset first"));
        }
        if normalized_action.len() != ACTION_DIM {
            return Err(CuraError::DimensionMismatch {
                expected: ACTION_DIM,
                got: normalized_action.len(),
            });
        }
        if normalized_action.iter().any(|x| !x.is_finite()) {
            return Err(CuraError::non_finite("action"));
        }
        let action = self.action_from_normalized(normalized_action);
        self.step_physical(action)
    }

    /// Executes an already-physical command (used by replay).
    pub fn step_physical(&mut self, action: Action) -> Result<StepResult> {
        if self.done {
            return Err(CuraError::config("env", "step called on a finished episode; reset first"));
        }
        let limits = self.cfg.limits();
        let mut action = action.clamped(&limits);
        if self.opts.base_only {
            action.pusher_velocity = Vec2::ZERO;
        }
        let next = step_kinematics(&self.world, &action, self.cfg.dt, &limits);
        self.prev_world = std::mem::replace(&mut self.world, next);
        let spawn_events = spawn_due(
            &mut self.world,
            &mut self.schedule,
            self.object_start,
            &self.cfg,
            &mut self.spawn_rng,
        );
        self.spawn_log.extend_from_slice(&spawn_events);
        self.steps += 1;

        let termination = check_termination(&self.world, &self.cfg);
        let breakdown = compute_reward(
            &RewardInput {
                prev: &self.prev_world,
                cur: &self.world,
                action: &action,
                prev_action: &self.prev_action,
                prev_prev_action: &self.prev_prev_action,
                contact_local: self.contact_local,
            },
            &self.cfg,
            &self.reward_cfg,
        );
        self.prev_prev_action = self.prev_action;
        self.prev_action = action;
        self.done = termination.terminal();

        let observation = self.sense();
        self.observation = Some(observation.clone());
        Ok(StepResult {
            observation,
            reward: breakdown.total + if termination.success { self.reward_cfg.success_bonus } else { 0.0 },
            breakdown,
            termination,
            action,
            spawn_events,
        })
    }

    fn sense(&mut self) -> Observation {
        let scan = simulate_lidar(&self.world, self.cfg.lidar_beams, self.cfg.lidar_range, self.opts.occlusion);
        self.map.update(&scan, self.cfg.confidence_alpha);
        let latent = if self.opts.use_latent {
            self.encoder.encode(&self.map.local_window(&self.world.base))
        } else {
            vec![0.0; self.encoder.latent_dim()]
        };
        self.scan = Some(scan);
        Observation::build(
            &self.world,
            &self.prev_world,
            &self.prev_action,
            latent,
            self.cfg.dt,
            &self.cfg.limits(),
        )
    }

    pub fn observation(&self) -> &Observation {
        self.observation.as_ref().expect("reset always sets an observation")
    }

    pub fn features(&self) -> Vec<f64> {
        self.observation().to_features(&self.cfg.limits())
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn map(&self) -> &ConfidenceMap {
        &self.map
    }

    pub fn last_scan(&self) -> Option<&LidarScan> {
        self.scan.as_ref()
    }

    pub fn schedule(&self) -> &ObstacleSchedule {
        &self.schedule
    }

    /// Every spawn event of the current episode, in order.
    pub fn spawn_log(&self) -> &[SpawnEvent] {
        &self.spawn_log
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    pub fn contact_local(&self) -> Vec2 {
        self.contact_local
    }

    pub fn encoder(&self) -> &Arc<MapEncoder> {
        &self.encoder
    }
}

fn placeholder_world() -> WorldState {
    use crate::geometry::{OrientedRect, Pose2D};
    WorldState {
        base: Pose2D::default(),
        pusher: Vec2::ZERO,
        object: OrientedRect::square(Pose2D::default(), 1.0),
        obstacles: Vec::new(),
        goal: Pose2D::default(),
        sim_time: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::config::ObstacleCount;

    fn env(opts: EnvOptions) -> PushEnv {
        PushEnv::new(
            EpisodeConfig::default(),
            RewardConfig::default(),
            opts,
            Arc::new(MapEncoder::AveragePool),
        )
        .unwrap()
    }

    #[test]
    fn episode_terminates_within_timeout() {
        let mut e = env(EnvOptions::default());
        e.reset(5);
        let mut n = 0;
        loop {
            let r = e.step(&[0.0, 0.0, 0.0, 0.0]).unwrap();
            n += 1;
            if r.terminal() {
                break;
            }
        }
        assert!(n <= 251);
        assert!(e.step(&[0.0; 4]).is_err());
    }

    #[test]
    fn reset_is_deterministic() {
        let mut a = env(EnvOptions::default());
        let mut b = env(EnvOptions {
            occlusion: OcclusionMode::ObjectFiltered,
            use_latent: false,
            base_only: true,
        });
        a.reset(11);
        b.reset(11);
        assert_eq!(a.schedule().fingerprint(), b.schedule().fingerprint());
        assert_eq!(a.world().object, b.world().object);
        let mut c = env(EnvOptions::default());
        c.reset(11);
        for _ in 0..20 {
            let x = a.step(&[0.7, 0.1, 0.3, -0.2]).unwrap();
            let y = c.step(&[0.7, 0.1, 0.3, -0.2]).unwrap();
            assert_eq!(x.reward, y.reward);
            assert_eq!(a.world(), c.world());
        }
    }

    #[test]
    fn forward_push_moves_object_and_rewards_progress() {
        let mut cfg = EpisodeConfig::default();
        cfg.obstacle_count = ObstacleCount::Fixed(0);
        let mut e = PushEnv::new(cfg, RewardConfig::default(), EnvOptions::default(), Arc::new(MapEncoder::AveragePool))
            .unwrap();
        e.reset(2);
        let x0 = e.world().object.center().x;
        let r = e.step(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!(e.world().object.center().x > x0 + 0.1);
        assert!(r.breakdown.terms[2] > 0.9);
        assert_eq!(e.feature_dim(), 124);
    }

    #[test]
    fn base_only_ignores_pusher_command() {
        let mut e = env(EnvOptions {
            base_only: true,
            ..EnvOptions::default()
        });
        e.reset(4);
        let offset0 = e.world().pusher - e.world().base.position();
        e.step(&[0.0, 0.0, 1.0, 1.0]).unwrap();
        let offset1 = e.world().pusher - e.world().base.position();
        assert!((offset0 - offset1).norm() < 1e-12);
    }

    #[test]
    fn rejects_bad_actions() {
        let mut e = env(EnvOptions::default());
        assert!(matches!(e.step(&[0.0; 3]), Err(CuraError::DimensionMismatch { .. })));
        assert!(matches!(e.step(&[f64::NAN, 0.0, 0.0, 0.0]), Err(CuraError::NonFinite { .. })));
    }
}
