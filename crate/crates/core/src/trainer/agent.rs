//! Actor, critic and collision estimator, with their optimiser state and
//! on-disk layout.

use std::path::Path;

use rand::Rng;

use crate::dce::{CollisionDiscount, Dce};
use crate::error::Result;
use crate::nn::{Adam, Checkpoint, GaussianPolicy, Mlp};

use super::hyper::CuraHyperparams;

const ACTOR_FILE: &str = "actor.ckpt";
const CRITIC_FILE: &str = "critic.ckpt";
const DCE_FILE: &str = "dce.ckpt";
const ADAM_ACTOR_FILE: &str = "adam_actor.ckpt";
const ADAM_LOG_STD_FILE: &str = "adam_log_std.ckpt";
const ADAM_CRITIC_FILE: &str = "adam_critic.ckpt";
const ADAM_DCE_FILE: &str = "adam_dce.ckpt";

#[derive(Debug, Clone, PartialEq)]
pub struct Agent {
    pub policy: GaussianPolicy,
    pub critic: Mlp,
    pub dce: Dce,
}

fn sizes(input: usize, hidden: &[usize], output: usize) -> Vec<usize> {
    let mut s = vec![input];
    s.extend_from_slice(hidden);
    s.push(output);
    s
}

impl Agent {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, action_dim: usize, hp: &CuraHyperparams, rng: &mut R) -> Result<Self> {
        let policy_net = Mlp::new(&sizes(obs_dim, &hp.hidden, action_dim), 0.01, rng);
        let critic = Mlp::new(&sizes(obs_dim, &hp.hidden, 1), 1.0, rng);
        let dce = Dce::new(obs_dim, &hp.hidden, hp.n_quantiles, CollisionDiscount::new(hp.gamma_c)?, rng);
        Ok(Agent {
            policy: GaussianPolicy::new(policy_net, hp.init_log_std),
            critic,
            dce,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.policy.net.input_dim()
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        Checkpoint::from(&self.policy).save(&dir.join(ACTOR_FILE))?;
        Checkpoint::from(&self.critic).save(&dir.join(CRITIC_FILE))?;
        Checkpoint::from(&self.dce.net).save(&dir.join(DCE_FILE))?;
        Ok(())
    }

    pub fn load(dir: &Path, gamma_c: f64) -> Result<Self> {
        Ok(Agent {
            policy: Checkpoint::load(&dir.join(ACTOR_FILE))?.into_policy()?,
            critic: Checkpoint::load(&dir.join(CRITIC_FILE))?.into_mlp()?,
            dce: Dce {
                net: Checkpoint::load(&dir.join(DCE_FILE))?.into_mlp()?,
                gamma_c: CollisionDiscount::new(gamma_c)?,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimizers {
    pub actor: Adam,
    pub log_std: Adam,
    pub critic: Adam,
    pub dce: Adam,
}

impl Optimizers {
    pub fn new(agent: &Agent, hp: &CuraHyperparams) -> Self {
        Optimizers {
            actor: Adam::new(agent.policy.net.num_params(), hp.actor_lr),
            log_std: Adam::new(agent.policy.log_std.len(), hp.actor_lr),
            critic: Adam::new(agent.critic.num_params(), hp.critic_lr),
            dce: Adam::new(agent.dce.net.num_params(), hp.dce_lr),
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        Checkpoint::from(&self.actor).save(&dir.join(ADAM_ACTOR_FILE))?;
        Checkpoint::from(&self.log_std).save(&dir.join(ADAM_LOG_STD_FILE))?;
        Checkpoint::from(&self.critic).save(&dir.join(ADAM_CRITIC_FILE))?;
        Checkpoint::from(&self.dce).save(&dir.join(ADAM_DCE_FILE))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        Ok(Optimizers {
            actor: Checkpoint::load(&dir.join(ADAM_ACTOR_FILE))?.into_adam()?,
            log_std: Checkpoint::load(&dir.join(ADAM_LOG_STD_FILE))?.into_adam()?,
            critic: Checkpoint::load(&dir.join(ADAM_CRITIC_FILE))?.into_adam()?,
            dce: Checkpoint::load(&dir.join(ADAM_DCE_FILE))?.into_adam()?,
        })
    }
}
