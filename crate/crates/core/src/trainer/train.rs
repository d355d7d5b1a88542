//! The outer training loop: collect, estimate advantages and costs, then
//! update actor, critic and collision estimator together.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dce::{bellman_targets, CollisionDiscount, QuantileSet};
use crate::env::{EnvOptions, EpisodeConfig, KeyValues, PushEnv, RewardConfig, ACTION_DIM};
use crate::error::{CuraError, Result};
use crate::nn::clip_grad_norm;
use crate::perception::MapEncoder;
use crate::seeding::{derive_seed, stream};

use super::agent::{Agent, Optimizers};
use super::costs::{augmented_advantage, gae_advantages, mean_std, normalize, normalize_cost, risk_cost, uncertainty_cost};
use super::hyper::CuraHyperparams;
use super::rollout::{collect_rollouts, RolloutBatch};
use super::surrogate::{actor_loss_and_grad, ActorBatch};

/// Column names of the training log.
pub const TRAIN_LOG_COLUMNS: [&str; 11] = [
    "iteration",
    "episodes",
    "mean_reward",
    "success_rate",
    "collision_rate",
    "mean_risk",
    "mean_uncertainty",
    "actor_loss",
    "critic_loss",
    "dce_loss",
    "entropy",
];

pub const TRAIN_LOG_FILE: &str = "train_log.csv";
const MANIFEST_FILE: &str = "manifest.txt";

/// Learning signals derived from a batch before the gradient epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedBatch {
    pub advantages: Vec<f64>,
    pub value_targets: Vec<f64>,
    pub risk_cost: Vec<f64>,
    pub uncertainty_cost: Vec<f64>,
    /// `Ψ` after normalising advantages and both costs.
    pub psi: Vec<f64>,
    pub dce_targets: Array2<f64>,
}

pub fn prepare_batch(batch: &RolloutBatch, hp: &CuraHyperparams) -> Result<PreparedBatch> {
    let n = batch.len();
    let scaled: Vec<f64> = batch.rewards.iter().map(|r| r * hp.reward_scale).collect();
    let mut advantages = Vec::with_capacity(n);
    let mut value_targets = Vec::with_capacity(n);
    for e in 0..batch.n_envs {
        let s = e * batch.horizon..(e + 1) * batch.horizon;
        let (a, t) = gae_advantages(
            &scaled[s.clone()],
            &batch.values[s.clone()],
            &batch.next_values[s.clone()],
            &batch.terminals[s],
            hp.gamma,
            hp.gae_lambda,
        );
        advantages.extend(a);
        value_targets.extend(t);
    }
    let risk: Vec<f64> = (0..n)
        .map(|i| risk_cost(batch.collisions[i], batch.terminals[i], batch.risk[i], batch.risk_next[i], hp.gamma_c))
        .collect();
    let unc: Vec<f64> = (0..n)
        .map(|i| uncertainty_cost(batch.uncertainty[i], batch.uncertainty_next[i], batch.terminals[i]))
        .collect();
    let psi = augmented_advantage(
        &normalize(&advantages),
        &normalize_cost(&risk, hp.cost_norm_floor),
        &normalize_cost(&unc, hp.cost_norm_floor),
        hp.lambda_r,
        hp.lambda_u,
    );

    let gc = CollisionDiscount::new(hp.gamma_c)?;
    let nq = batch.next_quantiles.ncols();
    let mut dce_targets = Array2::zeros((n, nq));
    for i in 0..n {
        let next = QuantileSet::new(batch.next_quantiles.row(i).to_vec());
        let t = bellman_targets(batch.collisions[i], batch.terminals[i], &next, gc);
        for (k, v) in t.values.into_iter().enumerate() {
            dce_targets[[i, k]] = v;
        }
    }
    if psi.iter().chain(&value_targets).any(|v| !v.is_finite()) {
        return Err(CuraError::non_finite("advantages"));
    }
    Ok(PreparedBatch {
        advantages,
        value_targets,
        risk_cost: risk,
        uncertainty_cost: unc,
        psi,
        dce_targets,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UpdateStats {
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub dce_loss: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
}

/// Half mean squared error of the critic and its parameter gradient.
pub fn critic_loss_and_grad(critic: &crate::nn::Mlp, obs: ndarray::ArrayView2<'_, f64>, targets: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (pred, cache) = critic.forward_batch(obs)?;
    let b = obs.nrows() as f64;
    let mut out_grad = Array2::zeros(pred.raw_dim());
    let mut loss = 0.0;
    for (i, t) in targets.iter().enumerate() {
        let d = pred[[i, 0]] - t;
        loss += 0.5 * d * d;
        out_grad[[i, 0]] = d / b;
    }
    let mut grads = vec![0.0; critic.num_params()];
    critic.backward(&cache, out_grad.view(), &mut grads)?;
    Ok((loss / b, grads))
}

/// `K` epochs of shuffled minibatch updates on all three networks.
pub fn cura_update(
    agent: &mut Agent,
    opt: &mut Optimizers,
    batch: &RolloutBatch,
    prep: &PreparedBatch,
    hp: &CuraHyperparams,
    rng: &mut ChaCha8Rng,
) -> Result<UpdateStats> {
    let n = batch.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut sum = UpdateStats::default();
    let mut count = 0usize;
    for _ in 0..hp.epochs {
        idx.shuffle(rng);
        for chunk in idx.chunks(hp.minibatch) {
            let obs = batch.obs.select(Axis(0), chunk);
            let actions = batch.actions.select(Axis(0), chunk);
            let logp_old: Vec<f64> = chunk.iter().map(|&i| batch.logp[i]).collect();
            let psi: Vec<f64> = chunk.iter().map(|&i| prep.psi[i]).collect();
            let targets: Vec<f64> = chunk.iter().map(|&i| prep.value_targets[i]).collect();
            let dce_targets = prep.dce_targets.select(Axis(0), chunk);

            let mut ag = actor_loss_and_grad(
                &agent.policy,
                &ActorBatch {
                    obs: obs.view(),
                    actions: actions.view(),
                    logp_old: &logp_old,
                    psi: &psi,
                },
                hp.clip_eps,
                hp.entropy_coef,
            )?;
            clip_grad_norm(&mut [&mut ag.net, &mut ag.log_std], hp.max_grad_norm);
            opt.actor.step(agent.policy.net.params_mut(), &ag.net)?;
            opt.log_std.step(&mut agent.policy.log_std, &ag.log_std)?;

            let (closs, mut cg) = critic_loss_and_grad(&agent.critic, obs.view(), &targets)?;
            clip_grad_norm(&mut [&mut cg], hp.max_grad_norm);
            opt.critic.step(agent.critic.params_mut(), &cg)?;

            let (dloss, mut dg) = agent.dce.loss_and_grad(obs.view(), dce_targets.view())?;
            clip_grad_norm(&mut [&mut dg], hp.max_grad_norm);
            opt.dce.step(agent.dce.net.params_mut(), &dg)?;

            if !(closs.is_finite() && dloss.is_finite()) {
                return Err(CuraError::non_finite("critic or collision-estimator loss"));
            }
            sum.actor_loss += ag.loss;
            sum.critic_loss += closs;
            sum.dce_loss += dloss;
            sum.entropy += ag.entropy;
            sum.clip_fraction += ag.clip_fraction;
            sum.approx_kl += ag.approx_kl;
            count += 1;
        }
    }
    let c = count.max(1) as f64;
    Ok(UpdateStats {
        actor_loss: sum.actor_loss / c,
        critic_loss: sum.critic_loss / c,
        dce_loss: sum.dce_loss / c,
        entropy: sum.entropy / c,
        clip_fraction: sum.clip_fraction / c,
        approx_kl: sum.approx_kl / c,
    })
}

/// One row of the training log.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationStats {
    pub iteration: usize,
    pub episodes: usize,
    pub mean_reward: f64,
    pub success_rate: f64,
    pub collision_rate: f64,
    pub mean_risk: f64,
    pub mean_uncertainty: f64,
    pub actor_loss: f64,
    pub critic_loss: f64,
    pub dce_loss: f64,
    pub entropy: f64,
}

impl IterationStats {
    pub fn csv_header() -> String {
        TRAIN_LOG_COLUMNS.join(",")
    }

    pub fn to_csv_row(&self) -> String {
        let mut s = format!("{},{}", self.iteration, self.episodes);
        for v in [
            self.mean_reward,
            self.success_rate,
            self.collision_rate,
            self.mean_risk,
            self.mean_uncertainty,
            self.actor_loss,
            self.critic_loss,
            self.dce_loss,
            self.entropy,
        ] {
            write!(s, ",{v}").unwrap();
        }
        s
    }
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSetup {
    pub episode: EpisodeConfig,
    pub reward: RewardConfig,
    pub env: EnvOptions,
    pub hp: CuraHyperparams,
    pub seed: u64,
}

pub struct Trainer {
    setup: TrainSetup,
    agent: Agent,
    opt: Optimizers,
    envs: Vec<PushEnv>,
    completed: usize,
}

impl Trainer {
    pub fn new(setup: TrainSetup, encoder: Arc<MapEncoder>) -> Result<Self> {
        setup.hp.validate()?;
        let envs = make_envs(&setup, &encoder)?;
        let obs_dim = envs[0].feature_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(setup.seed, &[stream::INIT]));
        let agent = Agent::new(obs_dim, ACTION_DIM, &setup.hp, &mut rng)?;
        let opt = Optimizers::new(&agent, &setup.hp);
        Ok(Trainer {
            setup,
            agent,
            opt,
            envs,
            completed: 0,
        })
    }

    /// Restores networks, optimiser moments and the iteration counter from a
    /// checkpoint directory written by [`Trainer::save_checkpoint`]. All other
    /// random streams are functions of `(seed, iteration)`, so continuing is
    /// equivalent to never having stopped.
    pub fn resume(setup: TrainSetup, encoder: Arc<MapEncoder>, ckpt_dir: &Path) -> Result<Self> {
        let manifest = KeyValues::load(&ckpt_dir.join(MANIFEST_FILE))?;
        let mut completed = 0usize;
        manifest.set(&mut completed, "iteration")?;
        let mut seed = 0u64;
        manifest.set(&mut seed, "seed")?;
        if seed != setup.seed {
            return Err(CuraError::config("seed", format!("checkpoint was trained with seed {seed}")));
        }
        let envs = make_envs(&setup, &encoder)?;
        let agent = Agent::load(ckpt_dir, setup.hp.gamma_c)?;
        if agent.obs_dim() != envs[0].feature_dim() {
            return Err(CuraError::Checkpoint(format!(
                "checkpoint expects {} features, environment provides {}",
                agent.obs_dim(),
                envs[0].feature_dim()
            )));
        }
        let opt = Optimizers::load(ckpt_dir)?;
        Ok(Trainer {
            setup,
            agent,
            opt,
            envs,
            completed,
        })
    }

    pub fn setup(&self) -> &TrainSetup {
        &self.setup
    }

    pub fn agent(&self) -> &Agent {
        &self.agent
    }

    pub fn optimizers(&self) -> &Optimizers {
        &self.opt
    }

    /// Number of finished iterations.
    pub fn completed(&self) -> usize {
        self.completed
    }

    /// Collects a batch under the current snapshot without updating.
    pub fn collect(&mut self, iteration: usize) -> Result<RolloutBatch> {
        collect_rollouts(
            &mut self.envs,
            &self.agent,
            self.setup.hp.horizon,
            self.setup.seed,
            iteration as u64,
        )
    }

    /// Runs one collect → advantages → costs → update iteration.
    pub fn step(&mut self) -> Result<IterationStats> {
        let iteration = self.completed + 1;
        self.step_inner(iteration).map_err(|e| CuraError::Diverged {
            iteration,
            source: Box::new(e),
        })
    }

    fn step_inner(&mut self, iteration: usize) -> Result<IterationStats> {
        let batch = self.collect(iteration)?;
        let prep = prepare_batch(&batch, &self.setup.hp)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.setup.seed, &[stream::SHUFFLE, iteration as u64]));
        let up = cura_update(&mut self.agent, &mut self.opt, &batch, &prep, &self.setup.hp, &mut rng)?;
        self.completed = iteration;

        let episodes = batch.episodes.len();
        let rate = |f: fn(&super::rollout::EpisodeSummary) -> bool| {
            if episodes == 0 {
                0.0
            } else {
                batch.episodes.iter().filter(|e| f(e)).count() as f64 / episodes as f64
            }
        };
        Ok(IterationStats {
            iteration,
            episodes,
            mean_reward: mean_std(&batch.rewards).0,
            success_rate: rate(|e| e.success),
            collision_rate: rate(|e| e.collision),
            mean_risk: mean_std(&batch.risk).0,
            mean_uncertainty: mean_std(&batch.uncertainty).0,
            actor_loss: up.actor_loss,
            critic_loss: up.critic_loss,
            dce_loss: up.dce_loss,
            entropy: up.entropy,
        })
    }

    /// Writes `ckpt_XXXXX/` under `run_dir` and returns its path.
    pub fn save_checkpoint(&self, run_dir: &Path) -> Result<PathBuf> {
        let dir = run_dir.join(checkpoint_dir_name(self.completed));
        std::fs::create_dir_all(&dir).map_err(|e| CuraError::io(&dir, e))?;
        self.agent.save(&dir)?;
        self.opt.save(&dir)?;
        let mut m = KeyValues::default();
        m.insert("iteration", self.completed);
        m.insert("seed", self.setup.seed);
        m.insert("obs_dim", self.agent.obs_dim());
        m.insert("rng_streams", "derived from (seed, iteration); no mutable generator state");
        m.save(&dir.join(MANIFEST_FILE))?;
        Ok(dir)
    }
}

pub fn checkpoint_dir_name(iteration: usize) -> String {
    format!("ckpt_{iteration:05}")
}

/// Latest `ckpt_XXXXX` directory in `run_dir`, if any.
pub fn latest_checkpoint(run_dir: &Path) -> Result<Option<(usize, PathBuf)>> {
    let rd = std::fs::read_dir(run_dir).map_err(|e| CuraError::io(run_dir, e))?;
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in rd.flatten() {
        let name = entry.file_name();
        let Some(num) = name.to_str().and_then(|n| n.strip_prefix("ckpt_")) else {
            continue;
        };
        if let Ok(it) = num.parse::<usize>() {
            if entry.path().join(MANIFEST_FILE).exists() && best.as_ref().is_none_or(|(b, _)| it > *b) {
                best = Some((it, entry.path()));
            }
        }
    }
    Ok(best)
}

fn make_envs(setup: &TrainSetup, encoder: &Arc<MapEncoder>) -> Result<Vec<PushEnv>> {
    (0..setup.hp.n_envs)
        .map(|_| PushEnv::new(setup.episode.clone(), setup.reward, setup.env, encoder.clone()))
        .collect()
}

/// Runs `trainer` until `iterations` are complete, appending to the CSV log
/// in `run_dir` and checkpointing every `checkpoint_every` iterations and at
/// the end. `on_iteration` sees each finished row.
pub fn train_loop(
    trainer: &mut Trainer,
    run_dir: &Path,
    iterations: usize,
    mut on_iteration: impl FnMut(&IterationStats),
) -> Result<Vec<IterationStats>> {
    let log_path = run_dir.join(TRAIN_LOG_FILE);
    let mut log = if trainer.completed() == 0 || !log_path.exists() {
        format!("{}\n", IterationStats::csv_header())
    } else {
        truncate_log(&std::fs::read_to_string(&log_path).map_err(|e| CuraError::io(&log_path, e))?, trainer.completed())
    };
    std::fs::write(&log_path, &log).map_err(|e| CuraError::io(&log_path, e))?;
    let every = trainer.setup().hp.checkpoint_every;
    let mut rows = Vec::new();
    while trainer.completed() < iterations {
        let stats = trainer.step()?;
        log.push_str(&stats.to_csv_row());
        log.push('\n');
        std::fs::write(&log_path, &log).map_err(|e| CuraError::io(&log_path, e))?;
        on_iteration(&stats);
        if (every > 0 && stats.iteration % every == 0) || stats.iteration == iterations {
            trainer.save_checkpoint(run_dir)?;
        }
        rows.push(stats);
    }
    Ok(rows)
}

/// Keeps the header and the first `iterations` data rows.
fn truncate_log(text: &str, iterations: usize) -> String {
    let mut out = String::new();
    for line in text.lines().take(iterations + 1) {
        out.push_str(line);
        out.push('\n');
    }
    out
}
