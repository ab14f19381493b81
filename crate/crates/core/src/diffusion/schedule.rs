use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::tensor::Tensor;

/// Linear variance schedule. Steps are 1-based: `t` in `1..=T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    beta_start: f64,
    beta_end: f64,
    beta: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl NoiseSchedule {
    pub fn linear(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps < 2 {
            return Err(invalid(format!("schedule needs at least 2 steps, got {steps}")));
        }
        if !(0.0 < beta_start && beta_start < beta_end && beta_end < 1.0) {
            return Err(invalid(format!("schedule requires 0 < beta_1 < beta_T < 1, got {beta_start}, {beta_end}")));
        }
        let beta: Vec<f64> =
            (0..steps).map(|i| beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64).collect();
        let mut alpha_bar = Vec::with_capacity(steps);
        let mut acc = 1.0;
        for b in &beta {
            acc *= 1.0 - b;
            alpha_bar.push(acc);
        }
        Ok(Self { beta_start, beta_end, beta, alpha_bar })
    }

    pub fn steps(&self) -> usize {
        self.beta.len()
    }

    pub fn beta_start(&self) -> f64 {
        self.beta_start
    }

    pub fn beta_end(&self) -> f64 {
        self.beta_end
    }

    #[inline]
    pub fn beta(&self, t: usize) -> f64 {
        self.beta[t - 1]
    }

    #[inline]
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t - 1]
    }

    /// Reverse-process noise scale, `sigma_t^2 = beta_t`.
    #[inline]
    pub fn sigma(&self, t: usize) -> f64 {
        self.beta(t).sqrt()
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(invalid(format!("step {t} outside 1..={}", self.steps())));
        }
        Ok(())
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::linear(200, 1e-4, 0.02).expect("valid default schedule")
    }
}

/// `x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps`.
pub fn forward_diffuse(x0: &Tensor, t: usize, eps: &Tensor, sched: &NoiseSchedule) -> Result<Tensor> {
    sched.check_step(t)?;
    if x0.shape() != eps.shape() {
        return Err(Error::ShapeMismatch {
            expected: format!("{:?}", x0.shape()),
            actual: format!("{:?}", eps.shape()),
        });
    }
    let ab = sched.alpha_bar(t);
    let (a, b) = (ab.sqrt() as f32, (1.0 - ab).sqrt() as f32);
    let data = x0.data().iter().zip(eps.data()).map(|(&x, &e)| a * x + b * e).collect();
    Tensor::new(x0.shape().to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn first_alpha_bar_is_one_minus_beta() {
        let s = NoiseSchedule::linear(10, 0.01, 0.2).unwrap();
        assert_eq!(s.alpha_bar(1), 1.0 - 0.01);
        assert_eq!(s.beta(10), 0.2);
    }

    #[test]
    fn alpha_bar_strictly_decreasing() {
        let s = NoiseSchedule::linear(50, 1e-5, 0.5).unwrap();
        for t in 2..=50 {
            assert!(s.alpha_bar(t) < s.alpha_bar(t - 1));
            assert!(s.beta(t) > s.beta(t - 1));
            assert!(s.alpha_bar(t) > 0.0 && s.alpha_bar(t) < 1.0);
        }
    }

    /// Direct product over the 200 linear betas.
    #[test]
    fn default_alpha_bar_at_200() {
        let mut prod = 1.0f64;
        for i in 0..200 {
            prod *= 1.0 - (1e-4 + (0.02 - 1e-4) * i as f64 / 199.0);
        }
        assert!((prod - 0.132).abs() < 0.002, "product {prod}");
        let s = NoiseSchedule::linear(200, 1e-4, 0.02).unwrap();
        assert!((s.alpha_bar(200) - prod).abs() < 1e-12);
    }

    #[test]
    fn invalid_bounds_rejected() {
        assert!(NoiseSchedule::linear(1, 0.1, 0.2).is_err());
        assert!(NoiseSchedule::linear(10, 0.2, 0.1).is_err());
        assert!(NoiseSchedule::linear(10, 0.0, 0.1).is_err());
        assert!(NoiseSchedule::linear(10, 0.1, 1.0).is_err());
    }

    #[test]
    fn zero_noise_scales_signal() {
        let s = NoiseSchedule::default();
        let x0 = Tensor::new(vec![3], vec![1.0, -2.0, 0.5]).unwrap();
        let xt = forward_diffuse(&x0, 50, &Tensor::zeros(&[3]), &s).unwrap();
        let a = s.alpha_bar(50).sqrt() as f32;
        assert_eq!(xt.data(), &[a, -2.0 * a, 0.5 * a]);
    }

    #[test]
    fn tiny_beta_first_step_is_near_identity() {
        let s = NoiseSchedule::linear(10, 1e-9, 0.1).unwrap();
        let x0 = Tensor::new(vec![2], vec![0.3, -0.7]).unwrap();
        let eps = Tensor::new(vec![2], vec![1.0, 1.0]).unwrap();
        let xt = forward_diffuse(&x0, 1, &eps, &s).unwrap();
        for (a, b) in xt.data().iter().zip(x0.data()) {
            assert!((a - b).abs() < 1e-4);
        }
    }

    #[test]
    fn shape_mismatch_and_bad_step() {
        let s = NoiseSchedule::default();
        let x0 = Tensor::zeros(&[2]);
        assert!(forward_diffuse(&x0, 1, &Tensor::zeros(&[3]), &s).is_err());
        assert!(forward_diffuse(&x0, 0, &Tensor::zeros(&[2]), &s).is_err());
        assert!(forward_diffuse(&x0, 201, &Tensor::zeros(&[2]), &s).is_err());
    }

    /// Solving `x_t` for the noise reproduces it to 1e-6 wherever the f32
    /// state is not amplified by a tiny `sqrt(1 - abar)`; at the first steps
    /// the bound scales with that amplification.
    #[test]
    fn noise_recovery_inverts_forward() {
        let s = NoiseSchedule::default();
        let mut r = rng::seeded(3);
        let x0 = Tensor::new(vec![256], rng::normal_vec(&mut r, 256)).unwrap();
        let eps = Tensor::new(vec![256], rng::normal_vec(&mut r, 256)).unwrap();
        for t in [1, 5, 17, 60, 100, 150, 200] {
            let xt = forward_diffuse(&x0, t, &eps, &s).unwrap();
            let ab = s.alpha_bar(t);
            let amplification = 1.0 / (1.0 - ab).sqrt();
            let tol = if amplification <= 2.0 { 1e-6 } else { 1e-6 * amplification };
            for i in 0..256 {
                let rec = (xt.data()[i] as f64 - ab.sqrt() * x0.data()[i] as f64) / (1.0 - ab).sqrt();
                let e = eps.data()[i] as f64;
                assert!((rec - e).abs() < tol * e.abs().max(1.0), "t={t}");
            }
        }
    }

    #[test]
    fn forward_preserves_unit_variance() {
        let s = NoiseSchedule::default();
        let n = 100_000;
        let mut r = rng::seeded(11);
        let mut x0 = rng::normal_vec(&mut r, n);
        let mean = x0.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
        let sd = (x0.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
        for v in &mut x0 {
            *v = ((*v as f64 - mean) / sd) as f32;
        }
        let x0 = Tensor::new(vec![n], x0).unwrap();
        let eps = Tensor::new(vec![n], rng::normal_vec(&mut r, n)).unwrap();
        for t in [1, 100, 200] {
            let xt = forward_diffuse(&x0, t, &eps, &s).unwrap();
            let m = xt.data().iter().map(|&v| v as f64).sum::<f64>() / n as f64;
            let var = xt.data().iter().map(|&v| (v as f64 - m).powi(2)).sum::<f64>() / n as f64;
            assert!((var - 1.0).abs() < 0.02, "t={t} var={var}");
        }
    }
}
