use crate::error::{CuraError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
}

impl Adam {
    pub fn new(num_params: usize, lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; num_params],
            v: vec![0.0; num_params],
        }
    }

    /// One bias-corrected Adam update. Non-finite gradients abort before any
    /// parameter is touched.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(CuraError::DimensionMismatch {
                expected: self.m.len(),
                got: grads.len().min(params.len()),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(CuraError::non_finite("gradient passed to Adam"));
        }
        self.step += 1;
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Rescales the concatenation of `groups` to at most `max_norm` in L2.
/// Returns the norm before clipping.
pub fn clip_grad_norm(groups: &mut [&mut [f64]], max_norm: f64) -> f64 {
    let norm = groups
        .iter()
        .flat_map(|g| g.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for g in groups.iter_mut() {
            g.iter_mut().for_each(|x| *x *= s);
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut adam = Adam::new(3, 1e-2);
        let mut p = vec![1.0, -2.0, 3.0];
        for _ in 0..5 {
            adam.step(&mut p, &[0.0; 3]).unwrap();
        }
        assert_eq!(p, vec![1.0, -2.0, 3.0]);
    }

    #[test]
    fn first_step_closed_form() {
        let lr = 1e-3;
        let mut adam = Adam::new(3, lr);
        let g = [0.5, -2.0, 1e-3];
        let mut p = vec![0.0; 3];
        adam.step(&mut p, &g).unwrap();
        for k in 0..3 {
            // m̂ = g, v̂ = g², so the step is lr·g/(|g| + ε).
            let expect = -lr * g[k] / (g[k].abs() + 1e-8);
            assert!((p[k] - expect).abs() < 1e-15);
            assert!((p[k].abs() - lr).abs() < lr * 1e-4);
        }
    }

    #[test]
    fn nan_gradient_is_rejected() {
        let mut adam = Adam::new(2, 1e-3);
        let mut p = vec![1.0, 1.0];
        assert!(adam.step(&mut p, &[0.0, f64::NAN]).is_err());
        assert_eq!(p, vec![1.0, 1.0]);
        assert_eq!(adam.step, 0);
    }

    #[test]
    fn quadratic_bowl_descends_monotonically() {
        // f(x) = ½ Σ c_k x_k², gradient c_k x_k.
        let c = [1.0, 4.0, 0.25];
        let loss = |x: &[f64]| 0.5 * x.iter().zip(&c).map(|(x, c)| c * x * x).sum::<f64>();
        let mut x = vec![3.0, -2.0, 5.0];
        let mut adam = Adam::new(3, 0.005);
        let mut history = vec![loss(&x)];
        for _ in 0..200 {
            let g: Vec<f64> = x.iter().zip(&c).map(|(x, c)| c * x).collect();
            adam.step(&mut x, &g).unwrap();
            history.push(loss(&x));
        }
        for w in history[10..].windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "{} -> {}", w[0], w[1]);
        }
        assert!(history[200] < 0.8 * history[0]);
    }

    #[test]
    fn clipping_scales_to_max_norm() {
        let mut a = vec![3.0];
        let mut b = vec![4.0];
        let n = clip_grad_norm(&mut [&mut a, &mut b], 1.0);
        assert_eq!(n, 5.0);
        assert!((a[0] - 0.6).abs() < 1e-15 && (b[0] - 0.8).abs() < 1e-15);
    }
}
