//! Minimal layers with hand-written reverse-mode gradients.
//!
//! Parameters of a model live in one flat buffer; each layer stores offsets
//! into it. Forward passes return whatever the backward pass needs, and
//! backward passes accumulate into a gradient buffer with the same layout.
//! Every reduction runs in a fixed order so results are bit-reproducible.
//! All layers are generic over [`Scalar`] so gradients can be verified by
//! finite differences in 64-bit while training runs in 32-bit.

mod adam;
mod layers;

pub use adam::{Adam, AdamConfig};
pub use layers::{silu, silu_backward, upsample2, upsample2_backward, Conv3x3, Linear};

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::Float;

pub trait Scalar: Float + AddAssign + SubAssign + MulAssign + Sum + Debug + Default + Send + Sync + 'static {
    fn of(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

/// A named, contiguous slice of a flat parameter buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamSpan {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// Allocates parameter spans in declaration order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParamLayout {
    spans: Vec<ParamSpan>,
    total: usize,
}

impl ParamLayout {
    pub fn alloc(&mut self, name: &str, len: usize) -> usize {
        let offset = self.total;
        self.spans.push(ParamSpan { name: name.to_string(), offset, len });
        self.total += len;
        offset
    }

    pub fn spans(&self) -> &[ParamSpan] {
        &self.spans
    }

    pub fn total(&self) -> usize {
        self.total
    }
}

/// `y += a * x`.
#[inline]
pub(crate) fn axpy<T: Scalar>(y: &mut [T], a: T, x: &[T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Dot product with eight interleaved partial sums combined in a fixed
/// order.
#[inline]
pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 8];
    let chunks = n / 8;
    for c in 0..chunks {
        let i = c * 8;
        for k in 0..8 {
            acc[k] += a[i + k] * b[i + k];
        }
    }
    let mut tail = T::zero();
    for i in chunks * 8..n {
        tail += a[i] * b[i];
    }
    ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7])) + tail
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive() {
        let a: Vec<f64> = (0..37).map(|i| i as f64 * 0.5).collect();
        let b: Vec<f64> = (0..37).map(|i| 1.0 - i as f64 * 0.1).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert!((dot(&a, &b) - naive).abs() < 1e-9);
    }

    #[test]
    fn layout_offsets_are_contiguous() {
        let mut l = ParamLayout::default();
        assert_eq!(l.alloc("a", 3), 0);
        assert_eq!(l.alloc("b", 5), 3);
        assert_eq!(l.total(), 8);
    }
}
