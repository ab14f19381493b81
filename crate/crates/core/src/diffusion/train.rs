use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::net::{DenoiserInput, DenoiserNet};
use super::schedule::{forward_diffuse, NoiseSchedule};
use super::state::TrainingSample;
use super::{check_resolution, NULL_TAG};
use crate::error::{invalid, Error, Result};
use crate::nn::{Adam, AdamConfig, Scalar};
use crate::rng::{self, Rng};
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub p_uncond: f64,
    pub seed: u64,
    pub resolution: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 4,
            steps: 500,
            p_uncond: 0.1,
            seed: 0,
            resolution: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(invalid("learning_rate must be > 0"));
        }
        if !(0.0..1.0).contains(&self.p_uncond) {
            return Err(invalid("p_uncond must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(invalid("Adam betas must lie in [0, 1)"));
        }
        if !(self.adam_eps > 0.0) {
            return Err(invalid("adam_eps must be > 0"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch_size must be >= 1"));
        }
        check_resolution(self.resolution)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

/// A fully drawn training example: every random choice already made.
#[derive(Debug, Clone)]
pub struct Batch<T> {
    pub x_t: Vec<Vec<T>>,
    pub eps: Vec<Vec<T>>,
    pub sketch: Vec<Vec<T>>,
    pub t: Vec<usize>,
    pub tag: Vec<usize>,
    pub size: usize,
}

impl<T: Scalar> Batch<T> {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// Draws `t`, `ε` and condition dropout for each sample, in index order.
    pub fn draw(samples: &[&TrainingSample], p_uncond: f64, sched: &NoiseSchedule, r: &mut Rng) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::Empty("training batch".into()))?;
        let size = first.resolution();
        let mut b =
            Batch { x_t: Vec::new(), eps: Vec::new(), sketch: Vec::new(), t: Vec::new(), tag: Vec::new(), size };
        for s in samples {
            if s.resolution() != size {
                return Err(Error::ResolutionMismatch { expected: size, actual: s.resolution() });
            }
            let t = r.random_range(1..=sched.steps());
            let drop = r.random::<f64>() < p_uncond;
            let eps = Tensor::new(s.x0.shape().to_vec(), rng::normal_vec(r, s.x0.len()))?;
            let x_t = forward_diffuse(&s.x0, t, &eps, sched)?;
            let cast = |v: &[f32]| v.iter().map(|&x| T::of(x as f64)).collect::<Vec<T>>();
            b.x_t.push(cast(x_t.data()));
            b.eps.push(cast(eps.data()));
            if drop {
                b.sketch.push(vec![T::zero(); size * size]);
                b.tag.push(NULL_TAG);
            } else {
                b.sketch.push(cast(s.sketch.data()));
                b.tag.push(s.tag);
            }
            b.t.push(t);
        }
        Ok(b)
    }
}

/// Mean over the batch of per-element squared error; gradients are
/// accumulated into `grads` in sample-index order.
pub fn batch_loss_and_grad<T: Scalar>(net: &DenoiserNet<T>, batch: &Batch<T>, grads: &mut [T]) -> Result<T> {
    if batch.is_empty() {
        return Err(Error::Empty("training batch".into()));
    }
    let nb = T::of(batch.len() as f64);
    let mut total = T::zero();
    for i in 0..batch.len() {
        let (pred, cache) = net.forward_cached(&DenoiserInput {
            x_t: &batch.x_t[i],
            sketch: &batch.sketch[i],
            t: batch.t[i],
            tag: batch.tag[i],
            size: batch.size,
        })?;
        let n = T::of(pred.len() as f64);
        let mut se = T::zero();
        let mut d_out = Vec::with_capacity(pred.len());
        let scale = T::of(2.0) / (n * nb);
        for (&p, &e) in pred.iter().zip(&batch.eps[i]) {
            let r = p - e;
            se += r * r;
            d_out.push(scale * r);
        }
        total += se / n;
        net.backward(&cache, &d_out, grads);
    }
    Ok(total / nb)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainStepOutcome {
    pub loss: f32,
}

/// One optimizer step on `samples`.
pub fn train_step(
    net: &mut DenoiserNet<f32>,
    opt: &mut Adam<f32>,
    samples: &[&TrainingSample],
    cfg: &TrainConfig,
    sched: &NoiseSchedule,
    r: &mut Rng,
) -> Result<TrainStepOutcome> {
    let batch = Batch::<f32>::draw(samples, cfg.p_uncond, sched, r)?;
    let mut grads = vec![0.0f32; net.param_count()];
    let loss = batch_loss_and_grad(net, &batch, &mut grads)?;
    if !loss.is_finite() {
        return Err(invalid("training diverged: non-finite loss"));
    }
    opt.update(net.params_mut(), &grads);
    Ok(TrainStepOutcome { loss })
}

/// Training state advanced one step at a time.
pub struct Trainer<'a> {
    pub net: DenoiserNet<f32>,
    opt: Adam<f32>,
    rng: Rng,
    order: Vec<usize>,
    cursor: usize,
    samples: &'a [TrainingSample],
    cfg: TrainConfig,
    sched: NoiseSchedule,
    losses: Vec<f32>,
}

impl<'a> Trainer<'a> {
    pub fn new(samples: &'a [TrainingSample], cfg: TrainConfig, sched: NoiseSchedule) -> Result<Self> {
        cfg.validate()?;
        if samples.is_empty() {
            return Err(Error::Empty("training set".into()));
        }
        if let Some(s) = samples.iter().find(|s| s.resolution() != cfg.resolution) {
            return Err(Error::ResolutionMismatch { expected: cfg.resolution, actual: s.resolution() });
        }
        let net = DenoiserNet::init(rng::sub_seed(cfg.seed, 0));
        let opt = Adam::new(cfg.adam(), net.param_count());
        Ok(Self {
            net,
            opt,
            rng: rng::seeded(rng::sub_seed(cfg.seed, 1)),
            order: Vec::new(),
            cursor: 0,
            samples,
            cfg,
            sched,
            losses: Vec::new(),
        })
    }

    /// Next minibatch, walking a reshuffled permutation of the samples.
    fn next_batch(&mut self) -> Vec<&'a TrainingSample> {
        let mut out = Vec::with_capacity(self.cfg.batch_size);
        while out.len() < self.cfg.batch_size {
            if self.cursor == self.order.len() {
                self.order = (0..self.samples.len()).collect();
                self.order.shuffle(&mut self.rng);
                self.cursor = 0;
            }
            out.push(&self.samples[self.order[self.cursor]]);
            self.cursor += 1;
        }
        out
    }

    pub fn step(&mut self) -> Result<f32> {
        let batch = self.next_batch();
        let out = train_step(&mut self.net, &mut self.opt, &batch, &self.cfg, &self.sched, &mut self.rng)?;
        self.losses.push(out.loss);
        Ok(out.loss)
    }

    pub fn losses(&self) -> &[f32] {
        &self.losses
    }

    pub fn into_parts(self) -> (DenoiserNet<f32>, Vec<f32>) {
        (self.net, self.losses)
    }
}

/// Runs `cfg.steps` steps, reporting `(step, loss)` after each.
pub fn train(
    samples: &[TrainingSample],
    cfg: &TrainConfig,
    sched: &NoiseSchedule,
    mut progress: impl FnMut(usize, f32),
) -> Result<(DenoiserNet<f32>, Vec<f32>)> {
    let mut trainer = Trainer::new(samples, cfg.clone(), sched.clone())?;
    for step in 0..cfg.steps {
        let loss = trainer.step()?;
        progress(step + 1, loss);
    }
    Ok(trainer.into_parts())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_samples(n: usize, r: usize) -> Vec<TrainingSample> {
        (0..n)
            .map(|k| {
                let p = r * r;
                let mut x0 = vec![0.0f32; 4 * p];
                for i in 0..p {
                    x0[i] = ((i + k) % r) as f32 / r as f32 - 0.5;
                    x0[3 * p + i] = -1.0;
                }
                let sketch: Vec<f32> = (0..p).map(|i| (i / r + k).is_multiple_of(4) as u8 as f32).collect();
                TrainingSample {
                    x0: Tensor::new(vec![4, r, r], x0).unwrap(),
                    sketch: Tensor::new(vec![1, r, r], sketch).unwrap(),
                    tag: 1 + k % 6,
                }
            })
            .collect()
    }

    #[test]
    fn empty_batch_is_an_error() {
        let sched = NoiseSchedule::default();
        let mut r = rng::seeded(0);
        assert!(Batch::<f32>::draw(&[], 0.1, &sched, &mut r).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig { p_uncond: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = TrainConfig { learning_rate: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn dropout_nulls_tag_and_sketch_together() {
        let samples = toy_samples(1, 16);
        let refs: Vec<&TrainingSample> = std::iter::repeat_n(&samples[0], 64).collect();
        let sched = NoiseSchedule::default();
        let mut r = rng::seeded(9);
        let b = Batch::<f32>::draw(&refs, 0.5, &sched, &mut r).unwrap();
        let mut dropped = 0;
        for i in 0..b.len() {
            let blank = b.sketch[i].iter().all(|&v| v == 0.0);
            assert_eq!(blank, b.tag[i] == NULL_TAG);
            dropped += blank as usize;
        }
        assert!(dropped > 10 && dropped < 54);
    }

    #[test]
    fn loss_is_pure_function_of_weights() {
        let samples = toy_samples(2, 16);
        let refs: Vec<&TrainingSample> = samples.iter().collect();
        let sched = NoiseSchedule::default();
        let b = Batch::<f32>::draw(&refs, 0.1, &sched, &mut rng::seeded(4)).unwrap();
        let mut net = DenoiserNet::<f32>::init(5);
        for (i, p) in net.params_mut().iter_mut().enumerate() {
            *p += (i % 13) as f32 * 1e-3;
        }
        let mut g1 = vec![0.0; net.param_count()];
        let mut g2 = vec![0.0; net.param_count()];
        let l1 = batch_loss_and_grad(&net, &b, &mut g1).unwrap();
        let l2 = batch_loss_and_grad(&net, &b, &mut g2).unwrap();
        assert_eq!(l1.to_bits(), l2.to_bits());
        assert_eq!(g1, g2);
    }

    #[test]
    fn fresh_net_loss_is_noise_power() {
        // ε̂ = 0 so the loss is the mean of ε², close to 1
        let samples = toy_samples(4, 16);
        let refs: Vec<&TrainingSample> = samples.iter().collect();
        let sched = NoiseSchedule::default();
        let b = Batch::<f32>::draw(&refs, 0.1, &sched, &mut rng::seeded(4)).unwrap();
        let net = DenoiserNet::<f32>::init(5);
        let mut g = vec![0.0; net.param_count()];
        let l = batch_loss_and_grad(&net, &b, &mut g).unwrap();
        assert!((l - 1.0).abs() < 0.1, "loss {l}");
    }

    #[test]
    fn training_is_deterministic_and_decreases() {
        let samples = toy_samples(2, 16);
        let cfg = TrainConfig { steps: 30, batch_size: 2, resolution: 16, seed: 3, ..Default::default() };
        let sched = NoiseSchedule::default();
        let (n1, l1) = train(&samples, &cfg, &sched, |_, _| {}).unwrap();
        let (n2, l2) = train(&samples, &cfg, &sched, |_, _| {}).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(n1.params(), n2.params());
        let head: f32 = l1[..5].iter().sum::<f32>() / 5.0;
        let tail: f32 = l1[25..].iter().sum::<f32>() / 5.0;
        assert!(tail < head, "{head} -> {tail}");
    }
}
