//! Distributional collision estimator.
//!
//! A network predicts `N` quantiles of the discounted collision count
//! `C = Σ_k γ_c^k c_{t+k}`. Risk is their mean, uncertainty their population
//! variance. Training matches the predicted set to distributional Bellman
//! targets under the energy distance.

use ndarray::{Array2, ArrayView2};
use rand::Rng;

use crate::error::{CuraError, Result};
use crate::nn::Mlp;

pub const DEFAULT_QUANTILES: usize = 50;
pub const DEFAULT_GAMMA_C: f64 = 0.9;

/// Discount applied to future collision indicators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionDiscount(f64);

impl CollisionDiscount {
    pub fn new(gamma_c: f64) -> Result<Self> {
        if !(gamma_c > 0.0 && gamma_c < 1.0) {
            return Err(CuraError::config("gamma_c", "must lie in (0, 1)"));
        }
        Ok(CollisionDiscount(gamma_c))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// Upper bound of the discounted collision count, `1 / (1 − γ_c)`.
    /// Snaps to the nearest integer when within rounding noise, so that
    /// `γ_c = 0.9` bounds targets by exactly 10.
    pub fn max_value(self) -> f64 {
        let m = 1.0 / (1.0 - self.0);
        if (m - m.round()).abs() < 1e-9 {
            m.round()
        } else {
            m
        }
    }
}

impl Default for CollisionDiscount {
    fn default() -> Self {
        CollisionDiscount(DEFAULT_GAMMA_C)
    }
}

/// Predicted quantile values. Order carries no meaning; levels are
/// `τ_i = (i − 0.5)/N` by position.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileSet {
    pub values: Vec<f64>,
}

impl QuantileSet {
    pub fn new(values: Vec<f64>) -> Self {
        QuantileSet { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn levels(&self) -> Vec<f64> {
        quantile_levels(self.values.len())
    }

    /// Fraction of values `≤ x`; the CDF implied by the quantile set.
    pub fn cdf(&self, x: f64) -> f64 {
        self.values.iter().filter(|&&v| v <= x).count() as f64 / self.values.len() as f64
    }
}

pub fn quantile_levels(n: usize) -> Vec<f64> {
    (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskUncertainty {
    pub risk: f64,
    pub uncertainty: f64,
}

pub fn risk_and_uncertainty(qs: &QuantileSet) -> RiskUncertainty {
    risk_and_uncertainty_of(&qs.values)
}

pub fn risk_and_uncertainty_of(values: &[f64]) -> RiskUncertainty {
    let n = values.len() as f64;
    let risk = values.iter().sum::<f64>() / n;
    let uncertainty = values.iter().map(|v| (v - risk) * (v - risk)).sum::<f64>() / n;
    RiskUncertainty { risk, uncertainty }
}

/// Distributional Bellman targets `c + γ_c · z'_j`, with the next
/// distribution replaced by zero on terminal steps, clamped to `[0, 1/(1−γ_c)]`.
pub fn bellman_targets(collision: bool, terminal: bool, next: &QuantileSet, gamma_c: CollisionDiscount) -> QuantileSet {
    let c = if collision { 1.0 } else { 0.0 };
    let hi = gamma_c.max_value();
    let values = next
        .values
        .iter()
        .map(|&z| {
            let boot = if terminal { 0.0 } else { gamma_c.value() * z };
            (c + boot).clamp(0.0, hi)
        })
        .collect();
    QuantileSet { values }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Energy distance between two equally sized sample sets,
/// `2E|z − Tz'| − E|Tz − Tz'| − E|z − z'|` over all `N²` index pairs,
/// together with its (sub)gradient w.r.t. the predictions.
pub fn energy_distance_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.len() != target.len() {
        return Err(CuraError::DimensionMismatch {
            expected: pred.len(),
            got: target.len(),
        });
    }
    if pred.is_empty() {
        return Err(CuraError::EmptyInput("energy distance of empty sets"));
    }
    let n = pred.len();
    let inv = 1.0 / (n * n) as f64;
    let mut grad = vec![0.0; n];
    for i in 0..n {
        let zi = pred[i];
        let mut g = 0.0;
        for j in 0..n {
            g += 2.0 * sign(zi - target[j]) - 2.0 * sign(zi - pred[j]);
        }
        grad[i] = g * inv;
    }
    // The value is order-invariant, so it is summed over sorted copies: equal
    // multisets then give bitwise-equal pair sums and a loss of exactly 0.
    let mut zs = pred.to_vec();
    let mut ts = target.to_vec();
    zs.sort_by(f64::total_cmp);
    ts.sort_by(f64::total_cmp);
    let pair_sum = |a: &[f64], b: &[f64]| -> f64 {
        a.iter().map(|x| b.iter().map(|y| (x - y).abs()).sum::<f64>()).sum()
    };
    let cross = pair_sum(&zs, &ts);
    let self_pred = pair_sum(&zs, &zs);
    let self_target = pair_sum(&ts, &ts);
    // Non-negative in exact arithmetic; clip summation noise.
    let loss = ((2.0 * cross - self_target - self_pred) * inv).max(0.0);
    Ok((loss, grad))
}

/// The estimator network and its settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Dce {
    pub net: Mlp,
    pub gamma_c: CollisionDiscount,
}

impl Dce {
    pub fn new<R: Rng + ?Sized>(obs_dim: usize, hidden: &[usize], n_quantiles: usize, gamma_c: CollisionDiscount, rng: &mut R) -> Self {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(n_quantiles);
        Dce {
            net: Mlp::new(&sizes, 0.01, rng),
            gamma_c,
        }
    }

    pub fn n_quantiles(&self) -> usize {
        self.net.output_dim()
    }

    pub fn predict_quantiles(&self, obs_features: &[f64]) -> Result<QuantileSet> {
        Ok(QuantileSet::new(self.net.forward(obs_features)?))
    }

    pub fn predict_batch(&self, obs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.net.forward_batch(obs)?.0)
    }

    /// Mean energy distance over a minibatch and its parameter gradient.
    pub fn loss_and_grad(&self, obs: ArrayView2<'_, f64>, targets: ArrayView2<'_, f64>) -> Result<(f64, Vec<f64>)> {
        let (pred, cache) = self.net.forward_batch(obs)?;
        let b = obs.nrows() as f64;
        let mut out_grad = Array2::zeros(pred.raw_dim());
        let mut total = 0.0;
        for r in 0..pred.nrows() {
            let p = pred.row(r).to_vec();
            let t = targets.row(r).to_vec();
            let (l, g) = energy_distance_loss(&p, &t)?;
            total += l;
            for (k, gk) in g.into_iter().enumerate() {
                out_grad[[r, k]] = gk / b;
            }
        }
        let mut grads = vec![0.0; self.net.num_params()];
        self.net.backward(&cache, out_grad.view(), &mut grads)?;
        Ok((total / b, grads))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn levels_are_midpoints() {
        assert_eq!(quantile_levels(4), vec![0.125, 0.375, 0.625, 0.875]);
    }

    #[test]
    fn constant_set_has_zero_uncertainty() {
        let ru = risk_and_uncertainty(&QuantileSet::new(vec![0.3; 50]));
        assert!((ru.risk - 0.3).abs() < 1e-15);
        assert!(ru.uncertainty.abs() < 1e-15);
    }

    #[test]
    fn two_point_set() {
        let ru = risk_and_uncertainty(&QuantileSet::new(vec![0.0, 1.0]));
        assert_eq!(ru.risk, 0.5);
        assert_eq!(ru.uncertainty, 0.25);
    }

    #[test]
    fn terminal_collision_targets_are_one() {
        let next = QuantileSet::new(vec![3.0, 7.0, 0.5]);
        let t = bellman_targets(true, true, &next, CollisionDiscount::default());
        assert_eq!(t.values, vec![1.0; 3]);
    }

    #[test]
    fn safe_absorbing_targets_are_zero() {
        let t = bellman_targets(false, false, &QuantileSet::new(vec![0.0; 5]), CollisionDiscount::default());
        assert_eq!(t.values, vec![0.0; 5]);
    }

    #[test]
    fn targets_saturate_at_upper_bound() {
        let g = CollisionDiscount::default();
        let t = bellman_targets(true, false, &QuantileSet::new(vec![10.0; 4]), g);
        for v in t.values {
            assert!((v - 10.0).abs() < 1e-12 && v <= 10.0);
        }
        let t = bellman_targets(true, false, &QuantileSet::new(vec![50.0, -3.0]), g);
        assert_eq!(t.values[0], 10.0);
        assert_eq!(t.values[1], 0.0);
    }

    #[test]
    fn invalid_discount_rejected() {
        assert!(CollisionDiscount::new(1.0).is_err());
        assert!(CollisionDiscount::new(0.0).is_err());
    }

    #[test]
    fn energy_distance_identical_multisets() {
        let (l, _) = energy_distance_loss(&[0.1, 2.0, 0.7], &[2.0, 0.7, 0.1]).unwrap();
        assert_eq!(l, 0.0);
    }

    #[test]
    fn energy_distance_single_points() {
        let (l, g) = energy_distance_loss(&[0.0], &[1.0]).unwrap();
        assert_eq!(l, 2.0);
        assert_eq!(g, vec![-2.0]);
    }

    #[test]
    fn energy_distance_length_mismatch() {
        assert!(energy_distance_loss(&[0.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn fresh_network_predicts_near_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dce = Dce::new(12, &[32, 32], 50, CollisionDiscount::default(), &mut rng);
        let qs = dce.predict_quantiles(&[0.5; 12]).unwrap();
        assert_eq!(qs.len(), 50);
        assert!(qs.values.iter().all(|v| v.abs() < 0.1));
        assert_eq!(qs, dce.predict_quantiles(&[0.5; 12]).unwrap());
    }

    #[test]
    fn dce_loss_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut dce = Dce::new(4, &[6], 5, CollisionDiscount::default(), &mut rng);
        // Larger output weights so predictions are well separated from ties.
        for p in dce.net.params_mut() {
            *p *= 30.0;
        }
        let obs = Array2::from_shape_fn((3, 4), |(i, j)| 0.3 * i as f64 - 0.2 * j as f64 + 0.05);
        let targets = Array2::from_shape_fn((3, 5), |(i, j)| 0.37 * j as f64 + 0.11 * i as f64 + 0.013);
        let (_, g) = dce.loss_and_grad(obs.view(), targets.view()).unwrap();
        let h = 1e-6;
        for k in 0..dce.net.num_params() {
            let orig = dce.net.params()[k];
            dce.net.params_mut()[k] = orig + h;
            let up = dce.loss_and_grad(obs.view(), targets.view()).unwrap().0;
            dce.net.params_mut()[k] = orig - h;
            let down = dce.loss_and_grad(obs.view(), targets.view()).unwrap().0;
            dce.net.params_mut()[k] = orig;
            let fd = (up - down) / (2.0 * h);
            let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-6);
            assert!(rel < 1e-3, "param {k}: fd {fd} analytic {}", g[k]);
        }
    }

    proptest! {
        #[test]
        fn energy_distance_nonnegative_and_symmetric(
            p in prop::collection::vec(-5.0f64..5.0, 1..20),
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let t: Vec<f64> = p.iter().map(|_| rng.random_range(-5.0..5.0)).collect();
            let (a, _) = energy_distance_loss(&p, &t).unwrap();
            let (b, _) = energy_distance_loss(&t, &p).unwrap();
            prop_assert!(a >= -1e-12);
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn zero_uncertainty_iff_all_equal(v in prop::collection::vec(0.0f64..10.0, 2..60)) {
            let ru = risk_and_uncertainty_of(&v);
            if v.iter().all(|x| *x == v[0]) {
                prop_assert!(ru.uncertainty < 1e-20);
            } else {
                prop_assert!(ru.uncertainty > 0.0);
            }
        }

        #[test]
        fn targets_stay_in_range(
            next in prop::collection::vec(-20.0f64..20.0, 1..60),
            c in any::<bool>(),
            terminal in any::<bool>(),
        ) {
            let t = bellman_targets(c, terminal, &QuantileSet::new(next), CollisionDiscount::default());
            prop_assert!(t.values.iter().all(|v| (0.0..=10.0).contains(v)));
        }
    }
}
