//! Learned per-pixel 3x3 filtering applied to a coarse fill.
//!
//! Three 3x3 convolutions (2 → 16 → 16 → 9, SiLU between) read the coarse
//! image and the hole mask and emit 9 logits per pixel. Their softmax is a
//! convex kernel over the pixel's clamped 3x3 neighborhood, so refined values
//! stay within the neighborhood's range. Known pixels pass through.

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::fmm::inpaint_fast_marching;
use crate::diffusion::TrainConfig;
use crate::error::{invalid, Error, Result};
use crate::nn::{silu, silu_backward, Adam, Conv3x3, ParamLayout, Scalar};
use crate::raster::{GrayImage, Mask};
use crate::rng;

const HIDDEN: usize = 16;
const TAPS: usize = 9;
pub const KERNEL_MAGIC: [u8; 4] = *b"SFRK";
const KERNEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelModel<T = f32> {
    layout: ParamLayout,
    c1: Conv3x3,
    c2: Conv3x3,
    c3: Conv3x3,
    params: Vec<T>,
}

/// One training pair: the clean sketch, its holes, and the coarse fill the
/// refinement starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSample {
    pub clean: GrayImage,
    pub holes: Mask,
    pub coarse: GrayImage,
}

impl KernelSample {
    /// Blanks `holes` in `clean` and fills them by fast marching.
    pub fn new(clean: GrayImage, holes: Mask, radius: usize) -> Result<Self> {
        let mut corrupted = clean.data().to_vec();
        for (v, &hole) in corrupted.iter_mut().zip(holes.data()) {
            if hole {
                *v = 0.0;
            }
        }
        let corrupted = GrayImage::new(clean.width(), clean.height(), corrupted)?;
        let coarse = inpaint_fast_marching(&corrupted, &holes, radius)?;
        Ok(Self { clean, holes, coarse })
    }
}

struct Cache<T> {
    col1: Vec<T>,
    z1: Vec<T>,
    col2: Vec<T>,
    z2: Vec<T>,
    col3: Vec<T>,
    weights: Vec<T>,
    neigh: Vec<T>,
}

#[inline]
fn tap_offsets() -> [(isize, isize); TAPS] {
    [(-1, -1), (0, -1), (1, -1), (-1, 0), (0, 0), (1, 0), (-1, 1), (0, 1), (1, 1)]
}

impl<T: Scalar> KernelModel<T> {
    fn skeleton() -> (ParamLayout, Conv3x3, Conv3x3, Conv3x3) {
        let mut l = ParamLayout::default();
        let c1 = Conv3x3::new(&mut l, "kernel.conv1", 2, HIDDEN, 1);
        let c2 = Conv3x3::new(&mut l, "kernel.conv2", HIDDEN, HIDDEN, 1);
        let c3 = Conv3x3::new(&mut l, "kernel.conv3", HIDDEN, TAPS, 1);
        (l, c1, c2, c3)
    }

    /// All weights zero: every kernel is uniform.
    pub fn zeros() -> Self {
        let (layout, c1, c2, c3) = Self::skeleton();
        let params = vec![T::zero(); layout.total()];
        Self { layout, c1, c2, c3, params }
    }

    /// He-uniform hidden layers and a zero output layer, so the initial
    /// kernels are uniform.
    pub fn init(seed: u64) -> Self {
        let mut m = Self::zeros();
        let mut r = rng::seeded(seed);
        for conv in [m.c1, m.c2] {
            let bound = (6.0 / conv.fan_in() as f64).sqrt();
            for p in &mut m.params[conv.weight..conv.weight + conv.out_ch * conv.fan_in()] {
                *p = T::of(r.random_range(-bound..bound));
            }
        }
        m
    }

    pub fn from_params(params: Vec<T>) -> Result<Self> {
        let mut m = Self::zeros();
        if params.len() != m.params.len() {
            return Err(Error::ModelFormat(format!(
                "kernel model expects {} parameters, found {}",
                m.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::ModelFormat("non-finite kernel parameter".into()));
        }
        m.params = params;
        Ok(m)
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    fn forward_cached(&self, coarse: &[T], holes: &[bool], w: usize, h: usize) -> (Vec<T>, Cache<T>) {
        let p = w * h;
        let mut input = Vec::with_capacity(2 * p);
        input.extend_from_slice(coarse);
        input.extend(holes.iter().map(|&b| if b { T::one() } else { T::zero() }));
        let (z1, col1) = self.c1.forward(&self.params, &input, h, w);
        let a1 = silu(&z1);
        let (z2, col2) = self.c2.forward(&self.params, &a1, h, w);
        let a2 = silu(&z2);
        let (logits, col3) = self.c3.forward(&self.params, &a2, h, w);

        let mut weights = vec![T::zero(); TAPS * p];
        let mut neigh = vec![T::zero(); TAPS * p];
        let mut out = coarse.to_vec();
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let mut m = logits[i];
                for j in 1..TAPS {
                    m = m.max(logits[j * p + i]);
                }
                let mut z = T::zero();
                for j in 0..TAPS {
                    let e = (logits[j * p + i] - m).exp();
                    weights[j * p + i] = e;
                    z += e;
                }
                let mut acc = T::zero();
                for (j, (dx, dy)) in tap_offsets().into_iter().enumerate() {
                    let qx = (x as isize + dx).clamp(0, w as isize - 1) as usize;
                    let qy = (y as isize + dy).clamp(0, h as isize - 1) as usize;
                    let v = coarse[qy * w + qx];
                    weights[j * p + i] = weights[j * p + i] / z;
                    neigh[j * p + i] = v;
                    acc += weights[j * p + i] * v;
                }
                if holes[i] {
                    out[i] = acc;
                }
            }
        }
        (out, Cache { col1, z1, col2, z2, col3, weights, neigh })
    }

    /// Softmax kernels `[9, H, W]` for a coarse image.
    pub fn kernels(&self, coarse: &[T], holes: &[bool], w: usize, h: usize) -> Vec<T> {
        self.forward_cached(coarse, holes, w, h).1.weights
    }

    fn backward(&self, cache: &Cache<T>, d_out: &[T], holes: &[bool], w: usize, h: usize, grads: &mut [T]) {
        let p = w * h;
        let mut d_logits = vec![T::zero(); TAPS * p];
        for i in 0..p {
            if !holes[i] {
                continue;
            }
            let mut mean = T::zero();
            for j in 0..TAPS {
                mean += cache.weights[j * p + i] * cache.neigh[j * p + i];
            }
            for j in 0..TAPS {
                d_logits[j * p + i] = d_out[i] * cache.weights[j * p + i] * (cache.neigh[j * p + i] - mean);
            }
        }
        let d_a2 = self.c3.backward(&self.params, &cache.col3, &d_logits, h, w, grads);
        let d_z2 = silu_backward(&cache.z2, &d_a2);
        let d_a1 = self.c2.backward(&self.params, &cache.col2, &d_z2, h, w, grads);
        let d_z1 = silu_backward(&cache.z1, &d_a1);
        let _ = self.c1.backward(&self.params, &cache.col1, &d_z1, h, w, grads);
    }

    /// Mean squared error of the refinement against the clean images over
    /// all pixels, averaged over samples; gradients accumulate in order.
    pub fn loss_and_grad(&self, samples: &[KernelSample], grads: &mut [T]) -> Result<T> {
        if samples.is_empty() {
            return Err(Error::Empty("kernel training set".into()));
        }
        let ns = T::of(samples.len() as f64);
        let mut total = T::zero();
        for s in samples {
            let (w, h) = (s.clean.width(), s.clean.height());
            let cast = |v: &[f32]| v.iter().map(|&x| T::of(x as f64)).collect::<Vec<T>>();
            let coarse = cast(s.coarse.data());
            let clean = cast(s.clean.data());
            let (out, cache) = self.forward_cached(&coarse, s.holes.data(), w, h);
            let n = T::of((w * h) as f64);
            let scale = T::of(2.0) / (n * ns);
            let mut se = T::zero();
            let mut d_out = vec![T::zero(); w * h];
            for i in 0..w * h {
                let r = out[i] - clean[i];
                se += r * r;
                d_out[i] = scale * r;
            }
            total += se / n;
            self.backward(&cache, &d_out, s.holes.data(), w, h, grads);
        }
        Ok(total / ns)
    }
}

impl KernelModel<f32> {
    /// Replaces hole pixels of a coarse fill by the predicted convex
    /// combination of their neighbors.
    pub fn refine(&self, coarse: &GrayImage, holes: &Mask) -> Result<GrayImage> {
        let (w, h) = (coarse.width(), coarse.height());
        if holes.width() != w || holes.height() != h {
            return Err(invalid("hole mask size differs from the image"));
        }
        let (out, _) = self.forward_cached(coarse.data(), holes.data(), w, h);
        Ok(GrayImage::from_fn_clamped(w, h, |x, y| out[y * w + x]))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.params.len());
        out.extend_from_slice(&KERNEL_MAGIC);
        out.extend_from_slice(&KERNEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.params.len() as u32).to_le_bytes());
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let err = |m: &str| Error::ModelFormat(format!("kernel model: {m}"));
        if bytes.len() < 12 || bytes[..4] != KERNEL_MAGIC {
            return Err(err("bad magic"));
        }
        let word = |at: usize| u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);
        if word(4) != KERNEL_VERSION {
            return Err(err("unsupported version"));
        }
        let n = word(8) as usize;
        if bytes.len() != 12 + 4 * n {
            return Err(err("length does not match parameter count"));
        }
        let params = bytes[12..].chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
        Self::from_params(params)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Outcome of kernel-model training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTrainReport {
    pub losses: Vec<f32>,
}

/// Full-batch Adam on `samples` for `cfg.steps` steps, using `cfg`'s
/// optimizer settings and seed.
pub fn train_kernel_model(samples: &[KernelSample], cfg: &TrainConfig) -> Result<(KernelModel, KernelTrainReport)> {
    if samples.is_empty() {
        return Err(Error::Empty("kernel training set".into()));
    }
    if !(cfg.learning_rate > 0.0) {
        return Err(invalid("learning_rate must be > 0"));
    }
    let mut model = KernelModel::<f32>::init(rng::sub_seed(cfg.seed, 7));
    let mut opt = Adam::new(cfg.adam(), model.params.len());
    let mut losses = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let mut grads = vec![0.0f32; model.params.len()];
        let loss = model.loss_and_grad(samples, &mut grads)?;
        losses.push(loss);
        opt.update(&mut model.params, &grads);
    }
    Ok((model, KernelTrainReport { losses }))
}
