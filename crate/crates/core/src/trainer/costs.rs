//! Advantage estimation, collision-risk and uncertainty costs, and batch
//! normalisation.

/// Guard below which a batch is treated as having zero spread.
pub const NORM_EPS: f64 = 1e-8;

/// Generalised advantage estimation over one contiguous trajectory segment.
///
/// `next_values[t]` is the value of the observation reached by step `t`;
/// it is ignored when `terminals[t]` is set. The recursion stops at the
/// segment end, where the bootstrap enters only through `next_values`.
/// Returns `(advantages, value_targets)`.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    next_values: &[f64],
    terminals: &[bool],
    gamma: f64,
    lambda: f64,
) -> (Vec<f64>, Vec<f64>) {
    let n = rewards.len();
    assert!(values.len() == n && next_values.len() == n && terminals.len() == n);
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let live = if terminals[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * live * next_values[t] - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
    }
    let targets = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    (adv, targets)
}

/// One-step TD residual of the expected discounted collision count.
pub fn risk_cost(collision: bool, terminal: bool, risk: f64, risk_next: f64, gamma_c: f64) -> f64 {
    let c = if collision { 1.0 } else { 0.0 };
    let live = if terminal { 0.0 } else { 1.0 };
    c + gamma_c * risk_next * live - risk
}

/// Change in predictive variance; negative when an action reduces ambiguity.
pub fn uncertainty_cost(uncertainty: f64, uncertainty_next: f64, terminal: bool) -> f64 {
    let live = if terminal { 0.0 } else { 1.0 };
    uncertainty_next * live - uncertainty
}

/// Population mean and standard deviation.
pub fn mean_std(x: &[f64]) -> (f64, f64) {
    if x.is_empty() {
        return (0.0, 0.0);
    }
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Z-score `(x − mean)/(std + 1e-8)`; all zeros when the spread is below
/// `NORM_EPS`.
pub fn normalize(x: &[f64]) -> Vec<f64> {
    let (mean, std) = mean_std(x);
    if std < NORM_EPS {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - mean) / (std + NORM_EPS)).collect()
}

/// Cost normalisation: the z-score of `normalize`, except that the
/// denominator never drops below `floor`, so a channel whose raw spread is
/// far below `floor` stays proportionally small instead of being blown up
/// to unit variance. With `floor ≤ 1e-8` this is exactly `normalize`.
pub fn normalize_cost(x: &[f64], floor: f64) -> Vec<f64> {
    let (mean, std) = mean_std(x);
    if std < NORM_EPS {
        return vec![0.0; x.len()];
    }
    let denom = (std + NORM_EPS).max(floor);
    x.iter().map(|v| (v - mean) / denom).collect()
}

/// `Ψ = Â − λ_r·C̄^R − λ_u·C̄^U`.
pub fn augmented_advantage(adv: &[f64], risk: &[f64], unc: &[f64], lambda_r: f64, lambda_u: f64) -> Vec<f64> {
    adv.iter()
        .zip(risk)
        .zip(unc)
        .map(|((a, r), u)| a - lambda_r * r - lambda_u * u)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn cost_floor_only_limits_tiny_spreads() {
        let big = [0.0, 1.0, 0.0, 0.0, 2.0];
        assert_eq!(normalize_cost(&big, 1e-2), normalize(&big));
        assert_eq!(normalize_cost(&big, 0.0), normalize(&big));
        let tiny: Vec<f64> = big.iter().map(|v| v * 1e-6).collect();
        let (_, std) = mean_std(&normalize_cost(&tiny, 1e-2));
        assert!((std - mean_std(&tiny).1 / 1e-2).abs() < 1e-12);
        assert_eq!(normalize_cost(&[0.5; 4], 1e-2), vec![0.0; 4]);
    }

    #[test]
    fn one_step_td_when_lambda_zero() {
        let (adv, _) = gae_advantages(&[1.0; 4], &[2.0; 4], &[2.0; 4], &[false; 4], 0.99, 0.0);
        for a in adv {
            assert_abs_diff_eq!(a, 1.0 + 0.99 * 2.0 - 2.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn null_case() {
        let (adv, tgt) = gae_advantages(&[0.0; 5], &[0.0; 5], &[0.0; 5], &[false; 5], 0.99, 0.95);
        assert!(adv.iter().chain(&tgt).all(|v| *v == 0.0));
    }

    #[test]
    fn matches_brute_force_sum() {
        let r = [0.5, -1.0, 2.0, 0.3, 1.1];
        let v = [0.2, 0.4, -0.3, 1.0, 0.7];
        let nv = [0.4, -0.3, 9.9, 0.7, 0.6];
        let d = [false, false, true, false, false];
        let (g, l) = (0.9, 0.8);
        let (adv, _) = gae_advantages(&r, &v, &nv, &d, g, l);
        for t in 0..5 {
            let mut sum = 0.0;
            let mut w = 1.0;
            for k in t..5 {
                let live = if d[k] { 0.0 } else { 1.0 };
                sum += w * (r[k] + g * live * nv[k] - v[k]);
                if d[k] {
                    break;
                }
                w *= g * l;
            }
            assert_abs_diff_eq!(adv[t], sum, epsilon = 1e-12);
        }
    }

    #[test]
    fn cost_examples() {
        assert_abs_diff_eq!(risk_cost(false, false, 2.0, 2.0, 0.9), -0.2, epsilon = 1e-12);
        assert_eq!(risk_cost(true, true, 1.0, 5.0, 0.9), 0.0);
        assert_eq!(uncertainty_cost(0.3, 0.3, false), 0.0);
        assert!(uncertainty_cost(0.5, 0.2, false) < 0.0);
        assert_eq!(uncertainty_cost(0.5, 7.0, true), -0.5);
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&[3.0; 6]), vec![0.0; 6]);
        let z = normalize(&[-1.0, 1.0]);
        assert_abs_diff_eq!(z[0], -1.0, epsilon = 1e-7);
        assert_abs_diff_eq!(z[1], 1.0, epsilon = 1e-7);
    }

    proptest! {
        #[test]
        fn normalized_moments(x in prop::collection::vec(-50.0f64..50.0, 2..200)) {
            let (_, s) = mean_std(&x);
            prop_assume!(s > 1e-3);
            let z = normalize(&x);
            let (m, s) = mean_std(&z);
            prop_assert!(m.abs() < 1e-6);
            prop_assert!((s - 1.0).abs() < 1e-6);
            let zz = normalize(&z);
            for (a, b) in z.iter().zip(&zz) {
                prop_assert!((a - b).abs() < 1e-6);
            }
        }
    }
}
