use super::{axpy, dot, ParamLayout, Scalar};

/// 3x3 convolution with zero padding 1 and stride 1 or 2, computed through
/// an im2col buffer. Weights are laid out `[out][in][ky][kx]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv3x3 {
    pub in_ch: usize,
    pub out_ch: usize,
    pub stride: usize,
    pub weight: usize,
    pub bias: usize,
}

impl Conv3x3 {
    pub fn new(layout: &mut ParamLayout, name: &str, in_ch: usize, out_ch: usize, stride: usize) -> Self {
        assert!(stride == 1 || stride == 2);
        let weight = layout.alloc(&format!("{name}.weight"), out_ch * in_ch * 9);
        let bias = layout.alloc(&format!("{name}.bias"), out_ch);
        Self { in_ch, out_ch, stride, weight, bias }
    }

    pub fn fan_in(&self) -> usize {
        self.in_ch * 9
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        if self.stride == 1 {
            (h, w)
        } else {
            (h / 2, w / 2)
        }
    }

    fn im2col<T: Scalar>(&self, input: &[T], h: usize, w: usize) -> Vec<T> {
        let (ho, wo) = self.out_dims(h, w);
        let p = ho * wo;
        let s = self.stride as isize;
        let mut col = vec![T::zero(); self.in_ch * 9 * p];
        for ci in 0..self.in_ch {
            let plane = &input[ci * h * w..(ci + 1) * h * w];
            for ky in 0..3isize {
                for kx in 0..3isize {
                    let row = &mut col[((ci * 9) + (ky * 3 + kx) as usize) * p..][..p];
                    for oy in 0..ho as isize {
                        let iy = oy * s + ky - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let src = &plane[iy as usize * w..(iy as usize + 1) * w];
                        let dst = &mut row[oy as usize * wo..(oy as usize + 1) * wo];
                        if s == 1 {
                            // ix = ox + kx - 1
                            let lo = (1 - kx).max(0) as usize;
                            let hi = (w as isize).min(w as isize + 1 - kx) as usize;
                            let shift = kx - 1;
                            dst[lo..hi]
                                .copy_from_slice(&src[(lo as isize + shift) as usize..(hi as isize + shift) as usize]);
                        } else {
                            for (ox, d) in dst.iter_mut().enumerate() {
                                let ix = ox as isize * s + kx - 1;
                                if ix >= 0 && ix < w as isize {
                                    *d = src[ix as usize];
                                }
                            }
                        }
                    }
                }
            }
        }
        col
    }

    fn col2im<T: Scalar>(&self, col: &[T], h: usize, w: usize) -> Vec<T> {
        let (ho, wo) = self.out_dims(h, w);
        let p = ho * wo;
        let s = self.stride as isize;
        let mut out = vec![T::zero(); self.in_ch * h * w];
        for ci in 0..self.in_ch {
            let plane = &mut out[ci * h * w..(ci + 1) * h * w];
            for ky in 0..3isize {
                for kx in 0..3isize {
                    let row = &col[((ci * 9) + (ky * 3 + kx) as usize) * p..][..p];
                    for oy in 0..ho as isize {
                        let iy = oy * s + ky - 1;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst = &mut plane[iy as usize * w..(iy as usize + 1) * w];
                        let src = &row[oy as usize * wo..(oy as usize + 1) * wo];
                        for (ox, &v) in src.iter().enumerate() {
                            let ix = ox as isize * s + kx - 1;
                            if ix >= 0 && ix < w as isize {
                                dst[ix as usize] += v;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Returns the `[out_ch, ho, wo]` output and the im2col buffer needed by
    /// [`Conv3x3::backward`].
    pub fn forward<T: Scalar>(&self, params: &[T], input: &[T], h: usize, w: usize) -> (Vec<T>, Vec<T>) {
        debug_assert_eq!(input.len(), self.in_ch * h * w);
        let (ho, wo) = self.out_dims(h, w);
        let p = ho * wo;
        let k = self.in_ch * 9;
        let col = self.im2col(input, h, w);
        let weights = &params[self.weight..self.weight + self.out_ch * k];
        let bias = &params[self.bias..self.bias + self.out_ch];
        let mut out = vec![T::zero(); self.out_ch * p];
        for (co, plane) in out.chunks_exact_mut(p).enumerate() {
            plane.fill(bias[co]);
        }
        for kk in 0..k {
            let crow = &col[kk * p..(kk + 1) * p];
            for (co, plane) in out.chunks_exact_mut(p).enumerate() {
                let wv = weights[co * k + kk];
                if wv != T::zero() {
                    axpy(plane, wv, crow);
                }
            }
        }
        (out, col)
    }

    /// Accumulates weight and bias gradients and returns the input gradient.
    pub fn backward<T: Scalar>(
        &self,
        params: &[T],
        col: &[T],
        grad_out: &[T],
        h: usize,
        w: usize,
        grads: &mut [T],
    ) -> Vec<T> {
        let (ho, wo) = self.out_dims(h, w);
        let p = ho * wo;
        let k = self.in_ch * 9;
        for co in 0..self.out_ch {
            let g = &grad_out[co * p..(co + 1) * p];
            grads[self.bias + co] += g.iter().copied().sum::<T>();
        }
        {
            let gw = &mut grads[self.weight..self.weight + self.out_ch * k];
            for kk in 0..k {
                let crow = &col[kk * p..(kk + 1) * p];
                for co in 0..self.out_ch {
                    gw[co * k + kk] += dot(&grad_out[co * p..(co + 1) * p], crow);
                }
            }
        }
        let weights = &params[self.weight..self.weight + self.out_ch * k];
        let mut dcol = vec![T::zero(); k * p];
        for kk in 0..k {
            let drow = &mut dcol[kk * p..(kk + 1) * p];
            for co in 0..self.out_ch {
                let wv = weights[co * k + kk];
                if wv != T::zero() {
                    axpy(drow, wv, &grad_out[co * p..(co + 1) * p]);
                }
            }
        }
        self.col2im(&dcol, h, w)
    }
}

/// Dense layer `y = W x + b` with `W` laid out `[out][in]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Linear {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: usize,
    pub bias: usize,
}

impl Linear {
    pub fn new(layout: &mut ParamLayout, name: &str, in_dim: usize, out_dim: usize) -> Self {
        let weight = layout.alloc(&format!("{name}.weight"), out_dim * in_dim);
        let bias = layout.alloc(&format!("{name}.bias"), out_dim);
        Self { in_dim, out_dim, weight, bias }
    }

    pub fn forward<T: Scalar>(&self, params: &[T], x: &[T]) -> Vec<T> {
        (0..self.out_dim)
            .map(|o| {
                let row = &params[self.weight + o * self.in_dim..][..self.in_dim];
                params[self.bias + o] + dot(row, x)
            })
            .collect()
    }

    pub fn backward<T: Scalar>(&self, params: &[T], x: &[T], grad_out: &[T], grads: &mut [T]) -> Vec<T> {
        let mut dx = vec![T::zero(); self.in_dim];
        for (o, &g) in grad_out.iter().enumerate() {
            grads[self.bias + o] += g;
            let gw = &mut grads[self.weight + o * self.in_dim..][..self.in_dim];
            axpy(gw, g, x);
            let row = &params[self.weight + o * self.in_dim..][..self.in_dim];
            axpy(&mut dx, g, row);
        }
        dx
    }
}

#[inline]
fn sigmoid<T: Scalar>(x: T) -> T {
    T::one() / (T::one() + (-x).exp())
}

/// `x * sigmoid(x)`.
pub fn silu<T: Scalar>(x: &[T]) -> Vec<T> {
    x.iter().map(|&v| v * sigmoid(v)).collect()
}

/// Gradient through SiLU given the pre-activation `x`.
pub fn silu_backward<T: Scalar>(x: &[T], grad_out: &[T]) -> Vec<T> {
    x.iter()
        .zip(grad_out)
        .map(|(&v, &g)| {
            let s = sigmoid(v);
            g * s * (T::one() + v * (T::one() - s))
        })
        .collect()
}

/// Nearest-neighbor 2x upsampling of `[c, h, w]`.
pub fn upsample2<T: Scalar>(x: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let (h2, w2) = (2 * h, 2 * w);
    let mut out = vec![T::zero(); c * h2 * w2];
    for ch in 0..c {
        for y in 0..h2 {
            let src = &x[ch * h * w + (y / 2) * w..][..w];
            let dst = &mut out[ch * h2 * w2 + y * w2..][..w2];
            for (xx, d) in dst.iter_mut().enumerate() {
                *d = src[xx / 2];
            }
        }
    }
    out
}

pub fn upsample2_backward<T: Scalar>(g: &[T], c: usize, h: usize, w: usize) -> Vec<T> {
    let (h2, w2) = (2 * h, 2 * w);
    let mut out = vec![T::zero(); c * h * w];
    for ch in 0..c {
        for y in 0..h2 {
            let src = &g[ch * h2 * w2 + y * w2..][..w2];
            let dst = &mut out[ch * h * w + (y / 2) * w..][..w];
            for (xx, &v) in src.iter().enumerate() {
                dst[xx / 2] += v;
            }
        }
    }
    out
}
