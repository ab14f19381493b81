use serde::{Deserialize, Serialize};

use super::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Adam with bias-corrected moments.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub config: AdamConfig,
    m: Vec<T>,
    v: Vec<T>,
    step: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        Self { config, m: vec![T::zero(); n_params], v: vec![T::zero(); n_params], step: 0 }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: &mut [T], grads: &[T]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let bc1 = T::of(1.0 - c.beta1.powi(self.step as i32));
        let bc2 = T::of(1.0 - c.beta2.powi(self.step as i32));
        let lr = T::of(c.learning_rate);
        let eps = T::of(c.eps);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (T::one() - b1) * g;
            self.v[i] = b2 * self.v[i] + (T::one() - b2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_on_square() {
        let mut w = [1.0f64];
        let mut opt = Adam::new(AdamConfig { learning_rate: 0.1, ..Default::default() }, 1);
        let g = [2.0 * w[0]];
        opt.update(&mut w, &g);
        assert!((w[0] - 0.9).abs() < 1e-8, "w1 = {}", w[0]);
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut w = vec![0.3f32, -1.2, 7.0];
        let before = w.clone();
        let mut opt = Adam::new(AdamConfig::default(), 3);
        for _ in 0..5 {
            opt.update(&mut w, &[0.0; 3]);
        }
        assert_eq!(w, before);
    }

    #[test]
    fn converges_on_quadratic() {
        let mut w = [5.0f64, -3.0];
        let mut opt = Adam::new(AdamConfig { learning_rate: 0.05, ..Default::default() }, 2);
        for _ in 0..2000 {
            let g = [2.0 * w[0], 2.0 * w[1]];
            opt.update(&mut w, &g);
        }
        assert!(w[0].abs() < 1e-2 && w[1].abs() < 1e-2);
    }
}
