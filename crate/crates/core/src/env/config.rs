//! Episode and reward settings, plus the flat `key = value` file format used
//! for every run configuration.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{CuraError, Result};
use crate::geometry::{KinematicLimits, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scenario {
    /// Obstacles anywhere in the spawn band.
    Uniform,
    /// Obstacles on the straight object-to-goal path.
    Adversarial,
    /// Each episode picks Uniform or Adversarial with equal probability.
    Mixed,
}

impl Scenario {
    /// The evaluation scenarios.
    pub const ALL: [Scenario; 2] = [Scenario::Uniform, Scenario::Adversarial];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Uniform => "uniform",
            Scenario::Adversarial => "adversarial",
            Scenario::Mixed => "mixed",
        })
    }
}

impl FromStr for Scenario {
    type Err = CuraError;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Ok(Scenario::Uniform),
            "adversarial" => Ok(Scenario::Adversarial),
            "mixed" => Ok(Scenario::Mixed),
            other => Err(CuraError::config("scenario", format!("unknown scenario `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObstacleCount {
    Fixed(usize),
    /// Uniform over `0..=max` per episode.
    Random { max: usize },
}

impl fmt::Display for ObstacleCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObstacleCount::Fixed(n) => write!(f, "{n}"),
            ObstacleCount::Random { max } => write!(f, "random:{max}"),
        }
    }
}

impl FromStr for ObstacleCount {
    type Err = CuraError;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || CuraError::config("obstacle_count", format!("expected N or random[:MAX], got `{s}`"));
        if s == "random" {
            return Ok(ObstacleCount::Random { max: 6 });
        }
        if let Some(max) = s.strip_prefix("random:") {
            let max = max.parse().map_err(|_| bad())?;
            if max > 6 {
                return Err(bad());
            }
            return Ok(ObstacleCount::Random { max });
        }
        let n: usize = s.parse().map_err(|_| bad())?;
        if n > 6 {
            return Err(bad());
        }
        Ok(ObstacleCount::Fixed(n))
    }
}

/// Everything that defines an episode distribution.
///
/// Region geometry (start, goal, spawn band, workspace) scales with
/// `world_scale`; body sizes, robot dimensions and tolerances do not.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeConfig {
    pub object_size: f64,
    pub obstacle_sizes: Vec<f64>,
    pub obstacle_count: ObstacleCount,
    pub scenario: Scenario,
    /// Obstacle band ahead of the initial object position (m, before scaling).
    pub spawn_band: (f64, f64),
    pub timeout: f64,
    pub dt: f64,
    pub reach_radius: f64,
    pub success_tolerance: f64,
    pub world_scale: f64,
    pub v_max: f64,
    pub pusher_v_max: f64,
    pub base_radius: f64,
    /// Pusher offset ahead of the base center when the arm is disabled.
    pub base_only_offset: f64,
    pub pusher_radius: f64,
    pub lidar_beams: usize,
    pub lidar_range: f64,
    pub confidence_alpha: f64,
    pub map_resolution: f64,
    /// Spawn times are drawn over `[0, spawn_time_fraction · timeout]`.
    pub spawn_time_fraction: f64,
    pub spawn_clearance: f64,
    pub spawn_attempts: usize,
}

impl Default for EpisodeConfig {
    fn default() -> Self {
        EpisodeConfig {
            object_size: 1.0,
            obstacle_sizes: vec![0.4, 0.6, 1.0],
            obstacle_count: ObstacleCount::Random { max: 6 },
            scenario: Scenario::Uniform,
            spawn_band: (3.0, 11.0),
            timeout: 50.0,
            dt: 0.2,
            reach_radius: 1.2,
            success_tolerance: 0.2,
            world_scale: 1.0,
            v_max: 0.8,
            pusher_v_max: 1.0,
            base_radius: 0.4,
            base_only_offset: 0.5,
            pusher_radius: 0.05,
            lidar_beams: 180,
            lidar_range: 8.0,
            confidence_alpha: 0.9,
            map_resolution: 0.1,
            spawn_time_fraction: 0.6,
            spawn_clearance: 0.3,
            spawn_attempts: 20,
        }
    }
}

/// Axis-aligned region `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub min: Vec2,
    pub max: Vec2,
}

impl Region {
    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }
}

impl EpisodeConfig {
    pub fn limits(&self) -> KinematicLimits {
        KinematicLimits {
            v_max: self.v_max,
            pusher_v_max: self.pusher_v_max,
            reach_radius: self.reach_radius,
        }
    }

    /// Maximum number of steps before the timeout fires.
    pub fn max_steps(&self) -> usize {
        (self.timeout / self.dt - 1e-9).ceil() as usize
    }

    pub fn start_region(&self) -> Region {
        let s = self.world_scale;
        Region {
            min: Vec2::new(-0.25 * s, -0.5 * s),
            max: Vec2::new(0.25 * s, 0.5 * s),
        }
    }

    pub fn goal_region(&self) -> Region {
        let s = self.world_scale;
        Region {
            min: Vec2::new(12.0 * s, -1.5 * s),
            max: Vec2::new(13.0 * s, 1.5 * s),
        }
    }

    /// Lateral half-width of the uniform spawn area.
    pub fn spawn_half_width(&self) -> f64 {
        3.0 * self.world_scale
    }

    pub fn workspace(&self) -> Region {
        let s = self.world_scale;
        let half_y = (4.0 * s).max(2.5);
        Region {
            min: Vec2::new(-3.0, -half_y),
            max: Vec2::new(14.0 * s, half_y),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("object_size", self.object_size),
            ("timeout", self.timeout),
            ("dt", self.dt),
            ("reach_radius", self.reach_radius),
            ("success_tolerance", self.success_tolerance),
            ("world_scale", self.world_scale),
            ("v_max", self.v_max),
            ("pusher_v_max", self.pusher_v_max),
            ("base_radius", self.base_radius),
            ("lidar_range", self.lidar_range),
            ("map_resolution", self.map_resolution),
        ];
        for (k, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CuraError::config(k, "must be positive"));
            }
        }
        if self.obstacle_sizes.is_empty() || self.obstacle_sizes.iter().any(|&s| s <= 0.0) {
            return Err(CuraError::config("obstacle_sizes", "need at least one positive size"));
        }
        if !(self.spawn_band.0 >= 0.0 && self.spawn_band.0 < self.spawn_band.1) {
            return Err(CuraError::config("spawn_band", "need 0 <= near < far"));
        }
        let far = self.spawn_band.1 * self.world_scale;
        if far > self.workspace().max.x {
            return Err(CuraError::config("spawn_band", "extends beyond the workspace"));
        }
        if !(self.confidence_alpha > 0.0 && self.confidence_alpha < 1.0) {
            return Err(CuraError::config("confidence_alpha", "must lie in (0, 1)"));
        }
        if self.lidar_beams < 8 {
            return Err(CuraError::config("lidar_beams", "must be at least 8"));
        }
        if self.spawn_attempts == 0 {
            return Err(CuraError::config("spawn_attempts", "must be at least 1"));
        }
        Ok(())
    }

    /// Applies recognised keys from `kv`, leaving the rest for other sections.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        kv.set(&mut self.object_size, "object_size")?;
        if let Some(v) = kv.get("obstacle_sizes") {
            self.obstacle_sizes = parse_list("obstacle_sizes", v)?;
        }
        kv.set(&mut self.obstacle_count, "obstacle_count")?;
        kv.set(&mut self.scenario, "scenario")?;
        if let Some(v) = kv.get("spawn_band") {
            let band = parse_list("spawn_band", v)?;
            if band.len() != 2 {
                return Err(CuraError::config("spawn_band", "expected two values"));
            }
            self.spawn_band = (band[0], band[1]);
        }
        kv.set(&mut self.timeout, "timeout")?;
        kv.set(&mut self.dt, "dt")?;
        kv.set(&mut self.reach_radius, "reach_radius")?;
        kv.set(&mut self.success_tolerance, "success_tolerance")?;
        kv.set(&mut self.world_scale, "world_scale")?;
        kv.set(&mut self.v_max, "v_max")?;
        kv.set(&mut self.pusher_v_max, "pusher_v_max")?;
        kv.set(&mut self.base_radius, "base_radius")?;
        kv.set(&mut self.base_only_offset, "base_only_offset")?;
        kv.set(&mut self.pusher_radius, "pusher_radius")?;
        kv.set(&mut self.lidar_beams, "lidar_beams")?;
        kv.set(&mut self.lidar_range, "lidar_range")?;
        kv.set(&mut self.confidence_alpha, "confidence_alpha")?;
        kv.set(&mut self.map_resolution, "map_resolution")?;
        kv.set(&mut self.spawn_time_fraction, "spawn_time_fraction")?;
        kv.set(&mut self.spawn_clearance, "spawn_clearance")?;
        kv.set(&mut self.spawn_attempts, "spawn_attempts")?;
        self.validate()
    }

    pub fn write_into(&self, kv: &mut KeyValues) {
        kv.insert("object_size", self.object_size);
        kv.insert("obstacle_sizes", join_list(&self.obstacle_sizes));
        kv.insert("obstacle_count", self.obstacle_count);
        kv.insert("scenario", self.scenario);
        kv.insert("spawn_band", format!("{},{}", self.spawn_band.0, self.spawn_band.1));
        kv.insert("timeout", self.timeout);
        kv.insert("dt", self.dt);
        kv.insert("reach_radius", self.reach_radius);
        kv.insert("success_tolerance", self.success_tolerance);
        kv.insert("world_scale", self.world_scale);
        kv.insert("v_max", self.v_max);
        kv.insert("pusher_v_max", self.pusher_v_max);
        kv.insert("base_radius", self.base_radius);
        kv.insert("base_only_offset", self.base_only_offset);
        kv.insert("pusher_radius", self.pusher_radius);
        kv.insert("lidar_beams", self.lidar_beams);
        kv.insert("lidar_range", self.lidar_range);
        kv.insert("confidence_alpha", self.confidence_alpha);
        kv.insert("map_resolution", self.map_resolution);
        kv.insert("spawn_time_fraction", self.spawn_time_fraction);
        kv.insert("spawn_clearance", self.spawn_clearance);
        kv.insert("spawn_attempts", self.spawn_attempts);
    }
}

/// Weights of the six reward terms, plus the terminal success reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub weights: [f64; 6],
    /// Paid once on the success step, on top of the six terms. Success ends
    /// the episode while every other step near the goal keeps paying
    /// roughly `w1 + w4`, so without this the return favours hovering just
    /// outside the tolerance. The default is the discounted value of staying
    /// at the goal, `(w1 + w2·e⁻⁵ + w4) / (1 − 0.99)`.
    pub success_bonus: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            weights: [4.0, 2.0, 1.0, 1.0, -0.1, -0.1],
            success_bonus: 500.0,
        }
    }
}

impl RewardConfig {
    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        for (k, w) in self.weights.iter_mut().enumerate() {
            kv.set(w, &format!("reward_w{}", k + 1))?;
        }
        kv.set(&mut self.success_bonus, "success_bonus")?;
        if !self.success_bonus.is_finite() || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(CuraError::config("reward", "weights and success_bonus must be finite"));
        }
        Ok(())
    }

    pub fn write_into(&self, kv: &mut KeyValues) {
        for (k, w) in self.weights.iter().enumerate() {
            kv.insert(&format!("reward_w{}", k + 1), w);
        }
        kv.insert("success_bonus", self.success_bonus);
    }
}

pub fn parse_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CuraError::config(key, format!("bad number `{s}`")))
        })
        .collect()
}

fn join_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Ordered flat `key = value` map. Lines starting with `#` are comments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: BTreeMap<String, String>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CuraError::config(format!("line {}", n + 1), "expected key = value"))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(CuraError::config(format!("line {}", n + 1), "empty key"));
            }
            entries.insert(k.to_string(), v.trim().to_string());
        }
        Ok(KeyValues { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CuraError::io(path, e))?;
        KeyValues::parse(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string()).map_err(|e| CuraError::io(path, e))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn insert(&mut self, key: &str, value: impl fmt::Display) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Parses `key` into `slot` when present.
    pub fn set<T>(&self, slot: &mut T, key: &str) -> Result<()>
    where
        T: FromStr,
        T::Err: fmt::Display,
    {
        if let Some(v) = self.get(key) {
            *slot = v
                .parse()
                .map_err(|e: T::Err| CuraError::config(key, e.to_string()))?;
        }
        Ok(())
    }
}

impl fmt::Display for KeyValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_comments_and_whitespace() {
        let kv = KeyValues::parse("# run\n object_size = 0.75\n\nscenario=adversarial\n").unwrap();
        let mut cfg = EpisodeConfig::default();
        cfg.apply(&kv).unwrap();
        assert_eq!(cfg.object_size, 0.75);
        assert_eq!(cfg.scenario, Scenario::Adversarial);
    }

    #[test]
    fn round_trip_through_text() {
        let mut cfg = EpisodeConfig {
            obstacle_count: ObstacleCount::Fixed(3),
            world_scale: 0.5,
            ..EpisodeConfig::default()
        };
        cfg.spawn_band = (3.0, 11.0);
        let mut kv = KeyValues::default();
        cfg.write_into(&mut kv);
        let mut back = EpisodeConfig::default();
        back.apply(&KeyValues::parse(&kv.to_string()).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = EpisodeConfig::default();
        assert!(cfg.apply(&KeyValues::parse("object_size = -1").unwrap()).is_err());
        let mut cfg = EpisodeConfig::default();
        assert!(cfg.apply(&KeyValues::parse("obstacle_count = 9").unwrap()).is_err());
        assert!(KeyValues::parse("no equals sign").is_err());
        let mut cfg = EpisodeConfig::default();
        assert!(cfg.apply(&KeyValues::parse("scenario = sideways").unwrap()).is_err());
    }

    #[test]
    fn defaults_match_protocol() {
        let cfg = EpisodeConfig::default();
        assert_eq!(cfg.max_steps(), 250);
        assert_eq!(cfg.spawn_band, (3.0, 11.0));
        assert_eq!(RewardConfig::default().weights, [4.0, 2.0, 1.0, 1.0, -0.1, -0.1]);
        cfg.validate().unwrap();
    }
}
