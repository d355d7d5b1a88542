//! Parallel on-policy data collection under a frozen parameter snapshot.

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dce::risk_and_uncertainty_of;
use crate::env::{PushEnv, ACTION_DIM};
use crate::error::{CuraError, Result};
use crate::seeding::{derive_seed, stream};

use super::agent::Agent;

/// Outcome of one episode finished during collection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpisodeSummary {
    pub seed: u64,
    pub steps: usize,
    pub episode_return: f64,
    pub success: bool,
    pub collision: bool,
    pub timeout: bool,
}

/// One environment's contribution, time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvTrajectory {
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub logp: Vec<f64>,
    pub values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub collisions: Vec<bool>,
    pub terminals: Vec<bool>,
    pub quantiles: Vec<f64>,
    pub bootstrap_value: f64,
    pub bootstrap_quantiles: Vec<f64>,
    pub episodes: Vec<EpisodeSummary>,
}

fn check_finite(values: &[f64], what: &str, env: usize, step: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(CuraError::non_finite(format!("{what} (env {env}, step {step})")))
    }
}

/// Runs `horizon` steps in one environment, resetting on terminal states.
/// Episode seeds and action noise derive from `(root_seed, iteration, env)`.
pub fn rollout_env(
    env: &mut PushEnv,
    agent: &Agent,
    horizon: usize,
    root_seed: u64,
    iteration: u64,
    env_index: usize,
) -> Result<EnvTrajectory> {
    let d = agent.obs_dim();
    let n_q = agent.dce.n_quantiles();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        root_seed,
        &[stream::ROLLOUT_ACTION, iteration, env_index as u64],
    ));
    let episode_seed = |k: u64| derive_seed(root_seed, &[stream::ROLLOUT_ENV, iteration, env_index as u64, k]);
    let mut episode_index = 0u64;
    let mut seed = episode_seed(episode_index);
    env.reset(seed);

    let mut t = EnvTrajectory {
        obs: Vec::with_capacity(horizon * d),
        actions: Vec::with_capacity(horizon * ACTION_DIM),
        logp: Vec::with_capacity(horizon),
        values: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
        collisions: Vec::with_capacity(horizon),
        terminals: Vec::with_capacity(horizon),
        quantiles: Vec::with_capacity(horizon * n_q),
        bootstrap_value: 0.0,
        bootstrap_quantiles: Vec::new(),
        episodes: Vec::new(),
    };
    let mut ep_return = 0.0;
    for step in 0..horizon {
        let f = env.features();
        check_finite(&f, "observation", env_index, step)?;
        let (action, logp) = agent.policy.sample(&f, &mut rng)?;
        check_finite(&action, "policy output", env_index, step)?;
        let value = agent.critic.forward(&f)?[0];
        let q = agent.dce.net.forward(&f)?;
        check_finite(&[value, logp], "critic output", env_index, step)?;
        check_finite(&q, "collision quantiles", env_index, step)?;
        let res = env.step(&action)?;
        ep_return += res.reward;

        t.obs.extend_from_slice(&f);
        t.actions.extend_from_slice(&action);
        t.logp.push(logp);
        t.values.push(value);
        t.rewards.push(res.reward);
        t.collisions.push(res.termination.collision);
        t.terminals.push(res.terminal());
        t.quantiles.extend_from_slice(&q);

        if res.terminal() {
            t.episodes.push(EpisodeSummary {
                seed,
                steps: env.steps(),
                episode_return: ep_return,
                success: res.termination.success,
                collision: res.termination.collision,
                timeout: res.termination.timeout,
            });
            ep_return = 0.0;
            episode_index += 1;
            seed = episode_seed(episode_index);
            env.reset(seed);
        }
    }
    let f = env.features();
    t.bootstrap_value = agent.critic.forward(&f)?[0];
    t.bootstrap_quantiles = agent.dce.net.forward(&f)?;
    check_finite(&t.bootstrap_quantiles, "bootstrap quantiles", env_index, horizon)?;
    check_finite(&[t.bootstrap_value], "bootstrap value", env_index, horizon)?;
    Ok(t)
}

/// Flattened batch, environment-major: row `e * horizon + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub n_envs: usize,
    pub horizon: usize,
    pub obs: Array2<f64>,
    pub actions: Array2<f64>,
    pub logp: Vec<f64>,
    pub values: Vec<f64>,
    pub next_values: Vec<f64>,
    pub rewards: Vec<f64>,
    pub collisions: Vec<bool>,
    pub terminals: Vec<bool>,
    /// Snapshot quantiles of `o_t` and of the observation reached by step t.
    pub quantiles: Array2<f64>,
    pub next_quantiles: Array2<f64>,
    pub risk: Vec<f64>,
    pub uncertainty: Vec<f64>,
    pub risk_next: Vec<f64>,
    pub uncertainty_next: Vec<f64>,
    pub episodes: Vec<EpisodeSummary>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.logp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logp.is_empty()
    }

    pub fn from_trajectories(trajs: Vec<EnvTrajectory>, obs_dim: usize, n_quantiles: usize) -> Result<Self> {
        let n_envs = trajs.len();
        if n_envs == 0 {
            return Err(CuraError::EmptyInput("rollout with no environments"));
        }
        let horizon = trajs[0].logp.len();
        let total = n_envs * horizon;
        let mut obs = Vec::with_capacity(total * obs_dim);
        let mut actions = Vec::with_capacity(total * ACTION_DIM);
        let mut quantiles = Vec::with_capacity(total * n_quantiles);
        let mut next_quantiles = Vec::with_capacity(total * n_quantiles);
        let mut b = RolloutBatch {
            n_envs,
            horizon,
            obs: Array2::zeros((0, obs_dim)),
            actions: Array2::zeros((0, ACTION_DIM)),
            logp: Vec::with_capacity(total),
            values: Vec::with_capacity(total),
            next_values: Vec::with_capacity(total),
            rewards: Vec::with_capacity(total),
            collisions: Vec::with_capacity(total),
            terminals: Vec::with_capacity(total),
            quantiles: Array2::zeros((0, n_quantiles)),
            next_quantiles: Array2::zeros((0, n_quantiles)),
            risk: Vec::with_capacity(total),
            uncertainty: Vec::with_capacity(total),
            risk_next: Vec::with_capacity(total),
            uncertainty_next: Vec::with_capacity(total),
            episodes: Vec::new(),
        };
        for tr in trajs {
            if tr.logp.len() != horizon {
                return Err(CuraError::DimensionMismatch {
                    expected: horizon,
                    got: tr.logp.len(),
                });
            }
            obs.extend_from_slice(&tr.obs);
            actions.extend_from_slice(&tr.actions);
            quantiles.extend_from_slice(&tr.quantiles);
            next_quantiles.extend_from_slice(&tr.quantiles[n_quantiles.min(tr.quantiles.len())..]);
            next_quantiles.extend_from_slice(&tr.bootstrap_quantiles);
            b.next_values.extend_from_slice(&tr.values[1.min(horizon)..]);
            b.next_values.push(tr.bootstrap_value);
            for t in 0..horizon {
                let ru = risk_and_uncertainty_of(&tr.quantiles[t * n_quantiles..(t + 1) * n_quantiles]);
                b.risk.push(ru.risk);
                b.uncertainty.push(ru.uncertainty);
            }
            b.logp.extend(tr.logp);
            b.values.extend(tr.values);
            b.rewards.extend(tr.rewards);
            b.collisions.extend(tr.collisions);
            b.terminals.extend(tr.terminals);
            b.episodes.extend(tr.episodes);
        }
        let shape_err = |_| CuraError::EmptyInput("rollout buffer shape");
        b.obs = Array2::from_shape_vec((total, obs_dim), obs).map_err(shape_err)?;
        b.actions = Array2::from_shape_vec((total, ACTION_DIM), actions).map_err(shape_err)?;
        b.quantiles = Array2::from_shape_vec((total, n_quantiles), quantiles).map_err(shape_err)?;
        b.next_quantiles = Array2::from_shape_vec((total, n_quantiles), next_quantiles).map_err(shape_err)?;
        for row in b.next_quantiles.rows() {
            let ru = risk_and_uncertainty_of(row.as_slice().expect("standard layout"));
            b.risk_next.push(ru.risk);
            b.uncertainty_next.push(ru.uncertainty);
        }
        Ok(b)
    }
}

/// Collects `horizon` steps from every environment concurrently. The result
/// does not depend on thread scheduling.
pub fn collect_rollouts(
    envs: &mut [PushEnv],
    agent: &Agent,
    horizon: usize,
    root_seed: u64,
    iteration: u64,
) -> Result<RolloutBatch> {
    let trajs = envs
        .par_iter_mut()
        .enumerate()
        .map(|(e, env)| rollout_env(env, agent, horizon, root_seed, iteration, e))
        .collect::<Result<Vec<_>>>()?;
    RolloutBatch::from_trajectories(trajs, agent.obs_dim(), agent.dce.n_quantiles())
}
