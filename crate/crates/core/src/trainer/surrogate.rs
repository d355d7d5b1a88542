//! The clipped policy objective on the augmented advantage, its gradient
//! through the Gaussian policy, and a plain PPO reference implementation.

use ndarray::{Array2, ArrayView2};

use crate::error::{CuraError, Result};
use crate::nn::gaussian::{LOG_STD_MAX, LOG_STD_MIN};
use crate::nn::{gaussian_log_prob, gaussian_log_prob_grad, GaussianPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct Surrogate {
    /// Mean of `min(ρΨ, clip(ρ, 1−ε, 1+ε)Ψ)`.
    pub objective: f64,
    /// Derivative of `objective` w.r.t. each new log-probability.
    pub d_logp: Vec<f64>,
    pub clip_fraction: f64,
}

/// Pessimistic clipped objective. Where the clipped branch is the active
/// minimum and `ρ` lies outside `[1−ε, 1+ε]`, the sample has zero gradient.
pub fn clipped_surrogate(logp_new: &[f64], logp_old: &[f64], psi: &[f64], eps: f64) -> Surrogate {
    let n = logp_new.len();
    assert!(logp_old.len() == n && psi.len() == n && n > 0);
    let inv_n = 1.0 / n as f64;
    let mut sum = 0.0;
    let mut d_logp = vec![0.0; n];
    let mut clipped = 0usize;
    for i in 0..n {
        let ratio = (logp_new[i] - logp_old[i]).exp();
        let unclipped = ratio * psi[i];
        let clipped_term = ratio.clamp(1.0 - eps, 1.0 + eps) * psi[i];
        let term = unclipped.min(clipped_term);
        sum += term;
        let outside = ratio < 1.0 - eps || ratio > 1.0 + eps;
        if outside {
            clipped += 1;
        }
        if unclipped <= clipped_term || !outside {
            d_logp[i] = ratio * psi[i] * inv_n;
        }
    }
    Surrogate {
        objective: sum * inv_n,
        d_logp,
        clip_fraction: clipped as f64 * inv_n,
    }
}

/// Standard PPO clipped objective on plain advantages, written out
/// independently of the augmented path for equivalence checks.
pub fn ppo_reference_objective(logp_new: &[f64], logp_old: &[f64], adv: &[f64], eps: f64) -> f64 {
    let terms: Vec<f64> = logp_new
        .iter()
        .zip(logp_old)
        .zip(adv)
        .map(|((new, old), a)| {
            let ratio = (new - old).exp();
            (ratio * a).min(ratio.clamp(1.0 - eps, 1.0 + eps) * a)
        })
        .collect();
    terms.iter().sum::<f64>() * (1.0 / terms.len() as f64)
}

/// One actor minibatch.
pub struct ActorBatch<'a> {
    pub obs: ArrayView2<'a, f64>,
    pub actions: ArrayView2<'a, f64>,
    pub logp_old: &'a [f64],
    pub psi: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct ActorGrads {
    /// `−objective − entropy_coef · entropy`, minimised.
    pub loss: f64,
    pub objective: f64,
    pub entropy: f64,
    pub clip_fraction: f64,
    /// Mean of `logp_old − logp_new`.
    pub approx_kl: f64,
    pub net: Vec<f64>,
    pub log_std: Vec<f64>,
}

/// New log-probabilities of `actions` under `policy`, with the network
/// means needed for backpropagation.
pub fn batch_log_probs(policy: &GaussianPolicy, obs: ArrayView2<'_, f64>, actions: ArrayView2<'_, f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let (means, _) = policy.net.forward_batch(obs)?;
    let log_std = policy.effective_log_std();
    let lp = (0..means.nrows())
        .map(|i| gaussian_log_prob(&means.row(i).to_vec(), &log_std, &actions.row(i).to_vec()))
        .collect();
    Ok((lp, means))
}

pub fn actor_loss_and_grad(policy: &GaussianPolicy, batch: &ActorBatch<'_>, eps: f64, entropy_coef: f64) -> Result<ActorGrads> {
    let b = batch.obs.nrows();
    if batch.actions.nrows() != b || batch.logp_old.len() != b || batch.psi.len() != b {
        return Err(CuraError::DimensionMismatch {
            expected: b,
            got: batch.actions.nrows().min(batch.logp_old.len()).min(batch.psi.len()),
        });
    }
    let (means, cache) = policy.net.forward_batch(batch.obs)?;
    let log_std = policy.effective_log_std();
    let a_dim = log_std.len();
    let mut logp_new = Vec::with_capacity(b);
    for i in 0..b {
        logp_new.push(gaussian_log_prob(
            &means.row(i).to_vec(),
            &log_std,
            &batch.actions.row(i).to_vec(),
        ));
    }
    if logp_new.iter().any(|v| !v.is_finite()) {
        return Err(CuraError::non_finite("actor log-probabilities"));
    }
    let sur = clipped_surrogate(&logp_new, batch.logp_old, batch.psi, eps);

    let mut out_grad = Array2::zeros((b, a_dim));
    let mut g_log_std = vec![0.0; a_dim];
    for i in 0..b {
        let (dm, ds) = gaussian_log_prob_grad(&means.row(i).to_vec(), &log_std, &batch.actions.row(i).to_vec());
        let w = -sur.d_logp[i];
        for k in 0..a_dim {
            out_grad[[i, k]] = w * dm[k];
            g_log_std[k] += w * ds[k];
        }
    }
    let entropy = policy.entropy();
    for (k, g) in g_log_std.iter_mut().enumerate() {
        *g -= entropy_coef;
        let raw = policy.log_std[k];
        if !(LOG_STD_MIN..=LOG_STD_MAX).contains(&raw) {
            *g = 0.0;
        }
    }
    let mut g_net = vec![0.0; policy.net.num_params()];
    policy.net.backward(&cache, out_grad.view(), &mut g_net)?;
    let approx_kl = batch
        .logp_old
        .iter()
        .zip(&logp_new)
        .map(|(o, n)| o - n)
        .sum::<f64>()
        / b as f64;
    let loss = -sur.objective - entropy_coef * entropy;
    if !loss.is_finite() {
        return Err(CuraError::non_finite("actor loss"));
    }
    Ok(ActorGrads {
        loss,
        objective: sur.objective,
        entropy,
        clip_fraction: sur.clip_fraction,
        approx_kl,
        net: g_net,
        log_std: g_log_std,
    })
}
