//! Deterministic, paired evaluation over the scenario × object-size grid.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::dce::risk_and_uncertainty_of;
use crate::env::{EpisodeConfig, PushEnv, Scenario, SpawnEvent};
use crate::error::{CuraError, Result};
use crate::perception::MapEncoder;
use crate::seeding::{derive_seed, stream};
use crate::trainer::{latest_checkpoint, Agent};

use super::run::{EncoderSource, RunConfig};
use super::variants::Variant;

pub const EVAL_REPORT_FILE: &str = "eval_report.csv";
pub const EVAL_EPISODES_FILE: &str = "eval_episodes.csv";
/// Object sizes of the evaluation grid.
pub const EVAL_SIZES: [f64; 3] = [0.5, 0.75, 1.0];
/// Steps after a spawn over which the uncertainty slope is fitted.
pub const SPAWN_WINDOW: usize = 10;
/// Minimum number of points needed for a slope.
const MIN_SLOPE_POINTS: usize = 5;

/// A trained policy with everything needed to run it.
pub struct LoadedPolicy {
    pub run: RunConfig,
    pub agent: Agent,
    pub encoder: Arc<MapEncoder>,
    pub checkpoint: PathBuf,
    pub iteration: usize,
}

/// Loads `run_dir`'s config and encoder plus `checkpoint` (default: the
/// newest `ckpt_*` directory).
pub fn load_policy(run_dir: &Path, checkpoint: Option<&Path>) -> Result<LoadedPolicy> {
    let run = RunConfig::from_run_dir(run_dir)?;
    let (iteration, checkpoint) = match checkpoint {
        Some(p) => (0, p.to_path_buf()),
        None => latest_checkpoint(run_dir)?
            .ok_or_else(|| CuraError::Checkpoint(format!("no checkpoint under {}", run_dir.display())))?,
    };
    let encoder = Arc::new(EncoderSource::Checkpoint(run_dir.join(super::run::ENCODER_FILE)).load()?);
    let agent = Agent::load(&checkpoint, run.setup.hp.gamma_c)?;
    let expected = crate::env::feature_dim(encoder.latent_dim());
    if agent.obs_dim() != expected {
        return Err(CuraError::Checkpoint(format!(
            "checkpoint expects {} features but the run's encoder gives {expected}",
            agent.obs_dim()
        )));
    }
    Ok(LoadedPolicy {
        run,
        agent,
        encoder,
        checkpoint,
        iteration,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub scenarios: Vec<Scenario>,
    pub sizes: Vec<f64>,
    pub episodes: usize,
    pub eval_seed: u64,
    pub jobs: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings {
            scenarios: Scenario::ALL.to_vec(),
            sizes: EVAL_SIZES.to_vec(),
            episodes: 300,
            eval_seed: 1000,
            jobs: 1,
        }
    }
}

/// Seed of evaluation episode `k` in a grid cell. Independent of the
/// variant and the training seed, so every policy meets the same episodes.
pub fn eval_episode_seed(eval_seed: u64, scenario: Scenario, object_size: f64, k: usize) -> u64 {
    let s = match scenario {
        Scenario::Uniform => 0,
        Scenario::Adversarial => 1,
        Scenario::Mixed => 2,
    };
    derive_seed(eval_seed, &[stream::EVAL, s, object_size.to_bits(), k as u64])
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub scenario: Scenario,
    pub object_size: f64,
    pub index: usize,
    pub seed: u64,
    pub success: bool,
    pub collision: bool,
    pub timeout: bool,
    pub steps: usize,
    pub final_uncertainty: f64,
    pub schedule_fingerprint: u64,
    /// Least-squares slope of uncertainty per step after the first spawn.
    pub post_spawn_slope: Option<f64>,
    /// DCE uncertainty of every observation, initial one included.
    pub uncertainty: Vec<f64>,
    /// Observation indices at which an obstacle appeared.
    pub spawn_steps: Vec<usize>,
}

/// Slope of a least-squares line through `(i, y_i)`.
pub fn ls_slope(y: &[f64]) -> Option<f64> {
    if y.len() < 2 {
        return None;
    }
    let n = y.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, v) in y.iter().enumerate() {
        let dx = i as f64 - mx;
        sxy += dx * (v - my);
        sxx += dx * dx;
    }
    Some(sxy / sxx)
}

/// Uncertainty slope over the `SPAWN_WINDOW` steps after the first spawn.
pub fn post_spawn_slope(uncertainty: &[f64], spawn_steps: &[usize]) -> Option<f64> {
    let s = *spawn_steps.first()?;
    let end = (s + SPAWN_WINDOW + 1).min(uncertainty.len());
    if end <= s || end - s < MIN_SLOPE_POINTS {
        return None;
    }
    ls_slope(&uncertainty[s..end])
}

fn spawned(events: &[SpawnEvent]) -> bool {
    events.iter().any(|e| matches!(e, SpawnEvent::Spawned { .. }))
}

/// Runs one episode with the mean action.
pub fn run_episode(policy: &LoadedPolicy, cfg: &EpisodeConfig, seed: u64) -> Result<EpisodeOutcome> {
    let mut env = PushEnv::new(
        cfg.clone(),
        policy.run.setup.reward,
        policy.run.setup.env,
        policy.encoder.clone(),
    )?;
    env.reset(seed);
    let fingerprint = env.schedule().fingerprint();
    let unc = |f: &[f64]| -> Result<f64> { Ok(risk_and_uncertainty_of(&policy.agent.dce.net.forward(f)?).uncertainty) };
    let mut uncertainty = vec![unc(&env.features())?];
    let mut spawn_steps = Vec::new();
    if spawned(env.spawn_log()) {
        spawn_steps.push(0);
    }
    loop {
        let f = env.features();
        let a = policy.agent.policy.mean_action(&f)?;
        if a.iter().any(|x| !x.is_finite()) {
            return Err(CuraError::non_finite("policy mean action"));
        }
        let r = env.step(&a)?;
        uncertainty.push(unc(&env.features())?);
        if spawned(&r.spawn_events) {
            spawn_steps.push(env.steps());
        }
        if r.terminal() {
            return Ok(EpisodeOutcome {
                scenario: cfg.scenario,
                object_size: cfg.object_size,
                index: 0,
                seed,
                success: r.termination.success,
                collision: r.termination.collision,
                timeout: r.termination.timeout,
                steps: env.steps(),
                final_uncertainty: *uncertainty.last().unwrap(),
                schedule_fingerprint: fingerprint,
                post_spawn_slope: post_spawn_slope(&uncertainty, &spawn_steps),
                uncertainty,
                spawn_steps,
            });
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalCell {
    pub variant: Variant,
    pub scenario: Scenario,
    pub object_size: f64,
    pub episodes: usize,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub timeout_rate: f64,
    pub mean_length: f64,
    pub mean_final_uncertainty: f64,
    pub train_seed: u64,
    pub eval_seed: u64,
    /// Combined fingerprint of every obstacle schedule in the cell.
    pub schedule_hash: u64,
}

pub const EVAL_CSV_HEADER: &str = "variant,scenario,object_size,episodes,success_rate,collision_rate,timeout_rate,mean_length,mean_final_uncertainty,train_seed,eval_seed,schedule_hash";

impl EvalCell {
    fn from_outcomes(variant: Variant, train_seed: u64, eval_seed: u64, outs: &[EpisodeOutcome]) -> EvalCell {
        let n = outs.len().max(1) as f64;
        let frac = |f: fn(&EpisodeOutcome) -> bool| outs.iter().filter(|o| f(o)).count() as f64 / n;
        let mut hash = 0xcbf2_9ce4_8422_2325u64;
        for o in outs {
            hash = (hash ^ o.schedule_fingerprint).wrapping_mul(0x0100_0000_01b3);
        }
        EvalCell {
            variant,
            scenario: outs[0].scenario,
            object_size: outs[0].object_size,
            episodes: outs.len(),
            success_rate: frac(|o| o.success),
            collision_rate: frac(|o| o.collision),
            timeout_rate: frac(|o| o.timeout),
            mean_length: outs.iter().map(|o| o.steps as f64).sum::<f64>() / n,
            mean_final_uncertainty: outs.iter().map(|o| o.final_uncertainty).sum::<f64>() / n,
            train_seed,
            eval_seed,
            schedule_hash: hash,
        }
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:016x}",
            self.variant,
            self.scenario,
            self.object_size,
            self.episodes,
            self.success_rate,
            self.collision_rate,
            self.timeout_rate,
            self.mean_length,
            self.mean_final_uncertainty,
            self.train_seed,
            self.eval_seed,
            self.schedule_hash
        )
    }

    pub fn from_csv_row(line: &str, line_no: usize) -> Result<EvalCell> {
        let bad = |reason: String| CuraError::Trace { line: line_no, reason };
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 12 {
            return Err(bad(format!("expected 12 columns, found {}", f.len())));
        }
        let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad(format!("column {i} is not a number")));
        let int = |i: usize| f[i].parse::<u64>().map_err(|_| bad(format!("column {i} is not an integer")));
        Ok(EvalCell {
            variant: f[0].parse()?,
            scenario: f[1].parse()?,
            object_size: num(2)?,
            episodes: int(3)? as usize,
            success_rate: num(4)?,
            collision_rate: num(5)?,
            timeout_rate: num(6)?,
            mean_length: num(7)?,
            mean_final_uncertainty: num(8)?,
            train_seed: int(9)?,
            eval_seed: int(10)?,
            schedule_hash: u64::from_str_radix(f[11], 16).map_err(|_| bad("bad schedule hash".into()))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub cells: Vec<EvalCell>,
    pub episodes: Vec<EpisodeOutcome>,
}

impl EvalReport {
    pub fn to_csv(&self) -> String {
        let per_cell = self.cells.first().map_or(0, |c| c.episodes);
        let mut s = format!(
            "# desk-scale evaluation: {per_cell} episodes per cell, mean action, paired seeds\n{EVAL_CSV_HEADER}\n"
        );
        for c in &self.cells {
            s.push_str(&c.to_csv_row());
            s.push('\n');
        }
        s
    }

    pub fn parse_csv(text: &str) -> Result<Vec<EvalCell>> {
        text.lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#') && !l.starts_with("variant,"))
            .map(|(i, l)| EvalCell::from_csv_row(l, i + 1))
            .collect()
    }

    pub fn episodes_csv(&self) -> String {
        let mut s = String::from(
            "scenario,object_size,index,seed,success,collision,timeout,steps,final_uncertainty,post_spawn_slope,schedule_fingerprint\n",
        );
        for o in &self.episodes {
            let slope = o.post_spawn_slope.map_or_else(|| "nan".to_string(), |v| v.to_string());
            writeln!(
                s,
                "{},{},{},{},{},{},{},{},{},{},{:016x}",
                o.scenario,
                o.object_size,
                o.index,
                o.seed,
                o.success as u8,
                o.collision as u8,
                o.timeout as u8,
                o.steps,
                o.final_uncertainty,
                slope,
                o.schedule_fingerprint
            )
            .unwrap();
        }
        s
    }

    pub fn cell(&self, scenario: Scenario, object_size: f64) -> Option<&EvalCell> {
        self.cells
            .iter()
            .find(|c| c.scenario == scenario && c.object_size == object_size)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CuraError::io(dir, e))?;
        let p = dir.join(EVAL_REPORT_FILE);
        std::fs::write(&p, self.to_csv()).map_err(|e| CuraError::io(&p, e))?;
        let p = dir.join(EVAL_EPISODES_FILE);
        std::fs::write(&p, self.episodes_csv()).map_err(|e| CuraError::io(&p, e))
    }
}

/// Evaluates `policy` on every (scenario, size) cell. Episodes run on up to
/// `settings.jobs` threads; results are ordered and independent of the
/// thread count.
pub fn run_eval(policy: &LoadedPolicy, settings: &EvalSettings) -> Result<EvalReport> {
    if settings.episodes == 0 {
        return Err(CuraError::config("episodes", "must be positive"));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.jobs.max(1))
        .build()
        .map_err(|e| CuraError::config("jobs", e.to_string()))?;
    let mut report = EvalReport {
        cells: Vec::new(),
        episodes: Vec::new(),
    };
    for &scenario in &settings.scenarios {
        for &size in &settings.sizes {
            let cfg = EpisodeConfig {
                scenario,
                object_size: size,
                ..policy.run.setup.episode.clone()
            };
            cfg.validate()?;
            let outs = pool.install(|| {
                (0..settings.episodes)
                    .into_par_iter()
                    .map(|k| {
                        let mut o = run_episode(policy, &cfg, eval_episode_seed(settings.eval_seed, scenario, size, k))?;
                        o.index = k;
                        Ok(o)
                    })
                    .collect::<Result<Vec<_>>>()
            })?;
            report.cells.push(EvalCell::from_outcomes(
                policy.run.variant,
                policy.run.setup.seed,
                settings.eval_seed,
                &outs,
            ));
            report.episodes.extend(outs);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_line() {
        assert_eq!(ls_slope(&[1.0, 0.5, 0.0, -0.5]), Some(-0.5));
        assert_eq!(ls_slope(&[3.0]), None);
        let u: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        assert!((post_spawn_slope(&u, &[4]).unwrap() - 0.1).abs() < 1e-12);
        assert_eq!(post_spawn_slope(&u, &[28]), None);
        assert_eq!(post_spawn_slope(&u, &[]), None);
    }

    #[test]
    fn cell_csv_round_trip() {
        let c = EvalCell {
            variant: Variant::CuraPpo,
            scenario: Scenario::Adversarial,
            object_size: 0.75,
            episodes: 300,
            success_rate: 0.5,
            collision_rate: 0.25,
            timeout_rate: 0.25,
            mean_length: 120.5,
            mean_final_uncertainty: 0.01,
            train_seed: 2,
            eval_seed: 1000,
            schedule_hash: 0xdead_beef,
        };
        assert_eq!(EvalCell::from_csv_row(&c.to_csv_row(), 1).unwrap(), c);
    }

    #[test]
    fn seeds_do_not_depend_on_variant() {
        let a = eval_episode_seed(5, Scenario::Uniform, 1.0, 3);
        assert_eq!(a, eval_episode_seed(5, Scenario::Uniform, 1.0, 3));
        assert_ne!(a, eval_episode_seed(5, Scenario::Adversarial, 1.0, 3));
        assert_ne!(a, eval_episode_seed(5, Scenario::Uniform, 0.5, 3));
    }
}
