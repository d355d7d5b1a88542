//! Trainer hyperparameters.

use crate::env::config::parse_list;
use crate::env::KeyValues;
use crate::error::{CuraError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CuraHyperparams {
    pub lambda_r: f64,
    pub lambda_u: f64,
    pub clip_eps: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub gamma_c: f64,
    pub n_quantiles: usize,
    pub epochs: usize,
    pub minibatch: usize,
    pub n_envs: usize,
    pub horizon: usize,
    pub entropy_coef: f64,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub dce_lr: f64,
    pub max_grad_norm: f64,
    /// Multiplies environment rewards before advantage estimation.
    pub reward_scale: f64,
    pub init_log_std: f64,
    /// Lower bound on the batch standard deviation used to normalise the
    /// risk and uncertainty costs, in collision-count units. Keeps a DCE
    /// whose spread has collapsed from having float noise scaled up to
    /// unit-variance costs. 1e-8 recovers the bare z-score.
    pub cost_norm_floor: f64,
    pub hidden: Vec<usize>,
    pub iterations: usize,
    pub checkpoint_every: usize,
}

impl Default for CuraHyperparams {
    fn default() -> Self {
        CuraHyperparams {
            lambda_r: 0.25,
            lambda_u: 1.0,
            clip_eps: 0.2,
            gamma: 0.99,
            gae_lambda: 0.95,
            gamma_c: 0.9,
            n_quantiles: 50,
            epochs: 4,
            minibatch: 256,
            n_envs: 8,
            horizon: 256,
            entropy_coef: 0.005,
            actor_lr: 3e-4,
            critic_lr: 3e-4,
            dce_lr: 3e-4,
            max_grad_norm: 0.5,
            reward_scale: 0.1,
            init_log_std: -0.5,
            cost_norm_floor: 1e-2,
            hidden: vec![128, 128],
            iterations: 300,
            checkpoint_every: 50,
        }
    }
}

impl CuraHyperparams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_r >= 0.0 && self.lambda_u >= 0.0) {
            return Err(CuraError::config("lambda_r/lambda_u", "cost weights must be non-negative"));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(CuraError::config("clip_eps", "must lie in (0, 1)"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err(CuraError::config("gamma/gae_lambda", "must lie in [0, 1]"));
        }
        if !(self.gamma_c > 0.0 && self.gamma_c < 1.0) {
            return Err(CuraError::config("gamma_c", "must lie in (0, 1)"));
        }
        for (k, v) in [
            ("n_quantiles", self.n_quantiles),
            ("epochs", self.epochs),
            ("minibatch", self.minibatch),
            ("n_envs", self.n_envs),
            ("horizon", self.horizon),
        ] {
            if v == 0 {
                return Err(CuraError::config(k, "must be positive"));
            }
        }
        if !(self.cost_norm_floor.is_finite() && self.cost_norm_floor >= 0.0) {
            return Err(CuraError::config("cost_norm_floor", "must be finite and non-negative"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(CuraError::config("hidden", "need at least one positive layer width"));
        }
        Ok(())
    }

    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        kv.set(&mut self.lambda_r, "lambda_r")?;
        kv.set(&mut self.lambda_u, "lambda_u")?;
        kv.set(&mut self.clip_eps, "clip_eps")?;
        kv.set(&mut self.gamma, "gamma")?;
        kv.set(&mut self.gae_lambda, "gae_lambda")?;
        kv.set(&mut self.gamma_c, "gamma_c")?;
        kv.set(&mut self.n_quantiles, "n_quantiles")?;
        kv.set(&mut self.epochs, "epochs")?;
        kv.set(&mut self.minibatch, "minibatch")?;
        kv.set(&mut self.n_envs, "n_envs")?;
        kv.set(&mut self.horizon, "horizon")?;
        kv.set(&mut self.entropy_coef, "entropy_coef")?;
        kv.set(&mut self.actor_lr, "actor_lr")?;
        kv.set(&mut self.critic_lr, "critic_lr")?;
        kv.set(&mut self.dce_lr, "dce_lr")?;
        kv.set(&mut self.max_grad_norm, "max_grad_norm")?;
        kv.set(&mut self.reward_scale, "reward_scale")?;
        kv.set(&mut self.init_log_std, "init_log_std")?;
        kv.set(&mut self.cost_norm_floor, "cost_norm_floor")?;
        if let Some(v) = kv.get("hidden") {
            self.hidden = parse_list("hidden", v)?
                .into_iter()
                .map(|x| {
                    if x >= 1.0 && x.fract() == 0.0 {
                        Ok(x as usize)
                    } else {
                        Err(CuraError::config("hidden", "layer widths must be positive integers"))
                    }
                })
                .collect::<Result<_>>()?;
        }
        kv.set(&mut self.iterations, "iterations")?;
        kv.set(&mut self.checkpoint_every, "checkpoint_every")?;
        self.validate()
    }

    pub fn write_into(&self, kv: &mut KeyValues) {
        kv.insert("lambda_r", self.lambda_r);
        kv.insert("lambda_u", self.lambda_u);
        kv.insert("clip_eps", self.clip_eps);
        kv.insert("gamma", self.gamma);
        kv.insert("gae_lambda", self.gae_lambda);
        kv.insert("gamma_c", self.gamma_c);
        kv.insert("n_quantiles", self.n_quantiles);
        kv.insert("epochs", self.epochs);
        kv.insert("minibatch", self.minibatch);
        kv.insert("n_envs", self.n_envs);
        kv.insert("horizon", self.horizon);
        kv.insert("entropy_coef", self.entropy_coef);
        kv.insert("actor_lr", self.actor_lr);
        kv.insert("critic_lr", self.critic_lr);
        kv.insert("dce_lr", self.dce_lr);
        kv.insert("max_grad_norm", self.max_grad_norm);
        kv.insert("reward_scale", self.reward_scale);
        kv.insert("init_log_std", self.init_log_std);
        kv.insert("cost_norm_floor", self.cost_norm_floor);
        kv.insert(
            "hidden",
            self.hidden.iter().map(|h| h.to_string()).collect::<Vec<_>>().join(","),
        );
        kv.insert("iterations", self.iterations);
        kv.insert("checkpoint_every", self.checkpoint_every);
    }
}
