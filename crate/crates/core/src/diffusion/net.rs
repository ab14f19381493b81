//! The conditional noise-prediction network.
//!
//! ```text
//! x_t [4,H,W] ++ sketch [1,H,W]
//!   conv1 3x3 5→32, SiLU                       (a1)
//!   down1 3x3/2 32→64, + emb_proj(embedding), SiLU
//!   mid1, mid2 3x3 64→64 with SiLU, residual around the pair
//!   nearest 2x upsample, up1 3x3 64→32, SiLU, + a1
//!   out 3x3 32→4 (zero-initialized)
//! embedding = time_mlp(sinusoid(t)) + tag_table[tag]
//! ```

use rand::Rng as _;

use super::TAG_VOCABULARY;
use crate::error::{Error, Result};
use crate::nn::{silu, silu_backward, upsample2, upsample2_backward, Conv3x3, Linear, ParamLayout, Scalar};
use crate::rng;

pub const STATE_CHANNELS: usize = 4;
pub const EMBED_DIM: usize = 32;
const BASE_CH: usize = 32;
const MID_CH: usize = 64;

/// Layer geometry; parameter offsets follow declaration order, which is also
/// the canonical order of the model file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenoiserLayout {
    pub params: ParamLayout,
    pub conv1: Conv3x3,
    pub down1: Conv3x3,
    pub emb_proj: Linear,
    pub mid1: Conv3x3,
    pub mid2: Conv3x3,
    pub up1: Conv3x3,
    pub out: Conv3x3,
    pub time1: Linear,
    pub time2: Linear,
    pub tag_table: usize,
    pub vocabulary: usize,
}

impl DenoiserLayout {
    pub fn new() -> Self {
        let mut p = ParamLayout::default();
        let conv1 = Conv3x3::new(&mut p, "conv1", STATE_CHANNELS + 1, BASE_CH, 1);
        let down1 = Conv3x3::new(&mut p, "down1", BASE_CH, MID_CH, 2);
        let emb_proj = Linear::new(&mut p, "emb_proj", EMBED_DIM, MID_CH);
        let mid1 = Conv3x3::new(&mut p, "mid1", MID_CH, MID_CH, 1);
        let mid2 = Conv3x3::new(&mut p, "mid2", MID_CH, MID_CH, 1);
        let up1 = Conv3x3::new(&mut p, "up1", MID_CH, BASE_CH, 1);
        let out = Conv3x3::new(&mut p, "out", BASE_CH, STATE_CHANNELS, 1);
        let time1 = Linear::new(&mut p, "time_mlp.0", EMBED_DIM, EMBED_DIM);
        let time2 = Linear::new(&mut p, "time_mlp.2", EMBED_DIM, EMBED_DIM);
        let vocabulary = TAG_VOCABULARY.len();
        let tag_table = p.alloc("tag_embedding", vocabulary * EMBED_DIM);
        Self { params: p, conv1, down1, emb_proj, mid1, mid2, up1, out, time1, time2, tag_table, vocabulary }
    }
}

impl Default for DenoiserLayout {
    fn default() -> Self {
        Self::new()
    }
}

/// `[sin(t f_i), cos(t f_i)]` with `f_i = 10000^(-2i/32)`, `i < 16`.
pub fn timestep_embedding<T: Scalar>(t: usize) -> Vec<T> {
    let half = EMBED_DIM / 2;
    let mut e = vec![T::zero(); EMBED_DIM];
    for i in 0..half {
        let freq = 10000f64.powf(-2.0 * i as f64 / EMBED_DIM as f64);
        let arg = t as f64 * freq;
        e[i] = T::of(arg.sin());
        e[half + i] = T::of(arg.cos());
    }
    e
}

/// Network weights plus fixed geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserNet<T = f32> {
    layout: DenoiserLayout,
    params: Vec<T>,
}

/// Inputs of one forward pass.
#[derive(Debug, Clone, Copy)]
pub struct DenoiserInput<'a, T> {
    pub x_t: &'a [T],
    pub sketch: &'a [T],
    pub t: usize,
    pub tag: usize,
    pub size: usize,
}

/// Intermediate values kept for the backward pass.
pub struct ForwardCache<T> {
    size: usize,
    tag: usize,
    temb0: Vec<T>,
    t1: Vec<T>,
    t1a: Vec<T>,
    emb: Vec<T>,
    col1: Vec<T>,
    z1: Vec<T>,
    col_down: Vec<T>,
    z2: Vec<T>,
    col_mid1: Vec<T>,
    z3: Vec<T>,
    col_mid2: Vec<T>,
    z4: Vec<T>,
    col_up: Vec<T>,
    z5: Vec<T>,
    col_out: Vec<T>,
}

impl<T: Scalar> DenoiserNet<T> {
    /// He-uniform weights, zero biases, zero output layer, small tag table.
    pub fn init(seed: u64) -> Self {
        let layout = DenoiserLayout::new();
        let mut params = vec![T::zero(); layout.params.total()];
        let mut r = rng::seeded(seed);
        let mut fill = |off: usize, len: usize, bound: f64, r: &mut rng::Rng| {
            for p in &mut params[off..off + len] {
                *p = T::of(r.random_range(-bound..bound));
            }
        };
        for conv in [&layout.conv1, &layout.down1, &layout.mid1, &layout.mid2, &layout.up1] {
            let bound = (6.0 / conv.fan_in() as f64).sqrt();
            fill(conv.weight, conv.out_ch * conv.fan_in(), bound, &mut r);
        }
        // mid2 feeds a residual branch; start it small
        let mid2 = layout.mid2;
        for p in &mut params[mid2.weight..mid2.weight + mid2.out_ch * mid2.fan_in()] {
            *p *= T::of(0.1);
        }
        let mut fill = |off: usize, len: usize, bound: f64, r: &mut rng::Rng| {
            for p in &mut params[off..off + len] {
                *p = T::of(r.random_range(-bound..bound));
            }
        };
        for lin in [&layout.emb_proj, &layout.time1, &layout.time2] {
            let bound = (6.0 / lin.in_dim as f64).sqrt();
            fill(lin.weight, lin.in_dim * lin.out_dim, bound, &mut r);
        }
        fill(layout.tag_table, layout.vocabulary * EMBED_DIM, 1.0, &mut r);
        Self { layout, params }
    }

    pub fn from_params(params: Vec<T>) -> Result<Self> {
        let layout = DenoiserLayout::new();
        if params.len() != layout.params.total() {
            return Err(Error::ModelFormat(format!(
                "expected {} parameters, found {}",
                layout.params.total(),
                params.len()
            )));
        }
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::ModelFormat("non-finite parameter".into()));
        }
        Ok(Self { layout, params })
    }

    pub fn layout(&self) -> &DenoiserLayout {
        &self.layout
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    /// Converts the weights to another precision.
    pub fn cast<U: Scalar>(&self) -> DenoiserNet<U> {
        DenoiserNet {
            layout: self.layout.clone(),
            params: self.params.iter().map(|p| U::of(Scalar::to_f64(*p))).collect(),
        }
    }

    fn check(&self, inp: &DenoiserInput<'_, T>) -> Result<()> {
        let s = inp.size;
        if s < 2 || !s.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("resolution {s} must be even")));
        }
        let plane = s * s;
        if inp.x_t.len() != STATE_CHANNELS * plane || inp.sketch.len() != plane {
            return Err(Error::ShapeMismatch {
                expected: format!("x_t [4,{s},{s}] and sketch [1,{s},{s}]"),
                actual: format!("{} and {} elements", inp.x_t.len(), inp.sketch.len()),
            });
        }
        if inp.tag >= self.layout.vocabulary {
            return Err(Error::InvalidArgument(format!("tag {} outside vocabulary", inp.tag)));
        }
        if inp.t == 0 {
            return Err(Error::InvalidArgument("timestep must be >= 1".into()));
        }
        Ok(())
    }

    /// Predicted noise `[4, H, W]`.
    pub fn forward(&self, inp: &DenoiserInput<'_, T>) -> Result<Vec<T>> {
        Ok(self.forward_cached(inp)?.0)
    }

    pub fn forward_cached(&self, inp: &DenoiserInput<'_, T>) -> Result<(Vec<T>, ForwardCache<T>)> {
        self.check(inp)?;
        let l = &self.layout;
        let p = &self.params;
        let s = inp.size;
        let hs = s / 2;

        let temb0 = timestep_embedding::<T>(inp.t);
        let t1 = l.time1.forward(p, &temb0);
        let t1a = silu(&t1);
        let mut emb = l.time2.forward(p, &t1a);
        let tag_row = &p[l.tag_table + inp.tag * EMBED_DIM..][..EMBED_DIM];
        for (e, &v) in emb.iter_mut().zip(tag_row) {
            *e += v;
        }
        let bias = l.emb_proj.forward(p, &emb);

        let mut x_in = Vec::with_capacity((STATE_CHANNELS + 1) * s * s);
        x_in.extend_from_slice(inp.x_t);
        x_in.extend_from_slice(inp.sketch);
        let (z1, col1) = l.conv1.forward(p, &x_in, s, s);
        let a1 = silu(&z1);

        let (mut z2, col_down) = l.down1.forward(p, &a1, s, s);
        for (c, plane) in z2.chunks_exact_mut(hs * hs).enumerate() {
            for v in plane {
                *v += bias[c];
            }
        }
        let a2 = silu(&z2);
        let (z3, col_mid1) = l.mid1.forward(p, &a2, hs, hs);
        let a3 = silu(&z3);
        let (z4, col_mid2) = l.mid2.forward(p, &a3, hs, hs);
        let a4: Vec<T> = silu(&z4).iter().zip(&a2).map(|(&m, &r)| m + r).collect();

        let u = upsample2(&a4, MID_CH, hs, hs);
        let (z5, col_up) = l.up1.forward(p, &u, s, s);
        let a5: Vec<T> = silu(&z5).iter().zip(&a1).map(|(&v, &skip)| v + skip).collect();
        let (out, col_out) = l.out.forward(p, &a5, s, s);

        Ok((
            out,
            ForwardCache {
                size: s,
                tag: inp.tag,
                temb0,
                t1,
                t1a,
                emb,
                col1,
                z1,
                col_down,
                z2,
                col_mid1,
                z3,
                col_mid2,
                z4,
                col_up,
                z5,
                col_out,
            },
        ))
    }

    /// Accumulates `dL/dθ` into `grads` given `dL/dε̂`.
    pub fn backward(&self, cache: &ForwardCache<T>, grad_out: &[T], grads: &mut [T]) {
        let l = &self.layout;
        let p = &self.params;
        let s = cache.size;
        let hs = s / 2;

        let d_a5 = l.out.backward(p, &cache.col_out, grad_out, s, s, grads);
        // a5 = silu(z5) + a1
        let d_z5 = silu_backward(&cache.z5, &d_a5);
        let d_u = l.up1.backward(p, &cache.col_up, &d_z5, s, s, grads);
        let d_a4 = upsample2_backward(&d_u, MID_CH, hs, hs);
        // a4 = silu(z4) + a2
        let d_z4 = silu_backward(&cache.z4, &d_a4);
        let d_a3 = l.mid2.backward(p, &cache.col_mid2, &d_z4, hs, hs, grads);
        let d_z3 = silu_backward(&cache.z3, &d_a3);
        let mut d_a2 = l.mid1.backward(p, &cache.col_mid1, &d_z3, hs, hs, grads);
        for (d, &r) in d_a2.iter_mut().zip(&d_a4) {
            *d += r;
        }
        let d_z2 = silu_backward(&cache.z2, &d_a2);
        let d_bias: Vec<T> = d_z2.chunks_exact(hs * hs).map(|plane| plane.iter().copied().sum::<T>()).collect();
        let mut d_a1 = l.down1.backward(p, &cache.col_down, &d_z2, s, s, grads);
        for (d, &skip) in d_a1.iter_mut().zip(&d_a5) {
            *d += skip;
        }
        let d_z1 = silu_backward(&cache.z1, &d_a1);
        // input gradient is not needed
        let _ = l.conv1.backward(p, &cache.col1, &d_z1, s, s, grads);

        let d_emb = l.emb_proj.backward(p, &cache.emb, &d_bias, grads);
        let tag_off = l.tag_table + cache.tag * EMBED_DIM;
        for (g, &d) in grads[tag_off..tag_off + EMBED_DIM].iter_mut().zip(&d_emb) {
            *g += d;
        }
        let d_t1a = l.time2.backward(p, &cache.t1a, &d_emb, grads);
        let d_t1 = silu_backward(&cache.t1, &d_t1a);
        let _ = l.time1.backward(p, &cache.temb0, &d_t1, grads);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(size: usize, seed: u64) -> (Vec<f32>, Vec<f32>) {
        let mut r = rng::seeded(seed);
        let x = rng::normal_vec(&mut r, 4 * size * size);
        let sk: Vec<f32> = (0..size * size).map(|_| r.random::<f32>()).collect();
        (x, sk)
    }

    #[test]
    fn fresh_network_predicts_zero() {
        let net = DenoiserNet::<f32>::init(1);
        let (x, sk) = inputs(16, 2);
        let out = net.forward(&DenoiserInput { x_t: &x, sketch: &sk, t: 37, tag: 3, size: 16 }).unwrap();
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_shape_follows_input() {
        let mut net = DenoiserNet::<f32>::init(1);
        for p in net.params_mut().iter_mut() {
            if *p == 0.0 {
                *p = 0.01;
            }
        }
        for size in [16, 32, 64] {
            let (x, sk) = inputs(size, 3);
            let out = net.forward(&DenoiserInput { x_t: &x, sketch: &sk, t: 5, tag: 0, size }).unwrap();
            assert_eq!(out.len(), 4 * size * size);
            assert!(out.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn shape_and_tag_errors() {
        let net = DenoiserNet::<f32>::init(1);
        let (x, sk) = inputs(16, 4);
        let bad = DenoiserInput { x_t: &x[..100], sketch: &sk, t: 1, tag: 0, size: 16 };
        assert!(net.forward(&bad).is_err());
        let bad_tag = DenoiserInput { x_t: &x, sketch: &sk, t: 1, tag: 99, size: 16 };
        assert!(net.forward(&bad_tag).is_err());
    }

    #[test]
    fn parameter_count_is_fixed() {
        let expect = (5 * 32 * 9 + 32)
            + (32 * 64 * 9 + 64)
            + (32 * 64 + 64)
            + 2 * (64 * 64 * 9 + 64)
            + (64 * 32 * 9 + 32)
            + (32 * 4 * 9 + 4)
            + 2 * (32 * 32 + 32)
            + 7 * 32;
        assert_eq!(DenoiserNet::<f32>::init(0).param_count(), expect);
    }

    #[test]
    fn time_embedding_first_frequency() {
        let e = timestep_embedding::<f64>(3);
        assert!((e[0] - 3f64.sin()).abs() < 1e-15);
        assert!((e[16] - 3f64.cos()).abs() < 1e-15);
    }
}
