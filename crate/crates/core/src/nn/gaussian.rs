use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::nn::mlp::Mlp;

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 2.0;

/// Diagonal Gaussian policy: the network produces the mean, the log standard
/// deviation is a state-independent learnable vector.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPolicy {
    pub net: Mlp,
    pub log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(net: Mlp, init_log_std: f64) -> Self {
        let d = net.output_dim();
        GaussianPolicy {
            net,
            log_std: vec![init_log_std; d],
        }
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn effective_log_std(&self) -> Vec<f64> {
        self.log_std
            .iter()
            .map(|l| l.clamp(LOG_STD_MIN, LOG_STD_MAX))
            .collect()
    }

    pub fn mean_action(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.net.forward(features)
    }

    /// Draws an action and returns it with its exact log density. The action
    /// is not clamped; bounds are enforced by the environment.
    pub fn sample<R: Rng + ?Sized>(&self, features: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64)> {
        let mean = self.net.forward(features)?;
        let log_std = self.effective_log_std();
        let action: Vec<f64> = mean
            .iter()
            .zip(&log_std)
            .map(|(m, ls)| {
                let eps: f64 = rng.sample(StandardNormal);
                m + ls.exp() * eps
            })
            .collect();
        let lp = gaussian_log_prob(&mean, &log_std, &action);
        Ok((action, lp))
    }

    /// Entropy of the diagonal Gaussian (independent of the state).
    pub fn entropy(&self) -> f64 {
        self.effective_log_std()
            .iter()
            .map(|ls| ls + 0.5 * (2.0 * PI * std::f64::consts::E).ln())
            .sum()
    }
}

pub fn gaussian_log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, ls), a)| {
            let z = (a - m) * (-ls).exp();
            -0.5 * z * z - ls - 0.5 * (2.0 * PI).ln()
        })
        .sum()
}

/// Partial derivatives of [`gaussian_log_prob`] w.r.t. the mean and the
/// (already clamped) log standard deviation.
pub fn gaussian_log_prob_grad(mean: &[f64], log_std: &[f64], action: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut dmean = Vec::with_capacity(mean.len());
    let mut dlog_std = Vec::with_capacity(mean.len());
    for ((m, ls), a) in mean.iter().zip(log_std).zip(action) {
        let inv_var = (-2.0 * ls).exp();
        let diff = a - m;
        dmean.push(diff * inv_var);
        dlog_std.push(diff * diff * inv_var - 1.0);
    }
    (dmean, dlog_std)
}
