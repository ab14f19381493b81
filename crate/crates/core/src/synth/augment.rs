use rand::Rng as _;

use crate::error::Result;
use crate::inpaint::{sample_training_mask_for, MaskDistribution};
use crate::raster::{GrayImage, Mask};
use crate::rng::{self, normal_vec, sub_seed};

/// Augmented copy of a clean sketch together with the deleted pixels.
///
/// The sketch is translated by up to `max_jitter` pixels per axis (vacated
/// pixels become 0), perturbed with Gaussian noise of `noise_sigma` and
/// clamped to `[0, 1]`; then the pixels of a mask drawn from `dist` are set
/// to 0. `dist = None` deletes nothing.
pub fn augment_sample(
    sketch: &GrayImage,
    seed: u64,
    dist: Option<&MaskDistribution>,
    noise_sigma: f32,
    max_jitter: usize,
) -> Result<(GrayImage, Mask)> {
    let (w, h) = (sketch.width(), sketch.height());
    let j = max_jitter as i64;
    let (dx, dy) = if j > 0 {
        let mut r = rng::seeded(sub_seed(seed, 0));
        (r.random_range(-j..=j), r.random_range(-j..=j))
    } else {
        (0, 0)
    };
    let shifted = |x: usize, y: usize| {
        let (sx, sy) = (x as i64 - dx, y as i64 - dy);
        if sx < 0 || sy < 0 || sx >= w as i64 || sy >= h as i64 {
            0.0
        } else {
            sketch.get(sx as usize, sy as usize)
        }
    };
    let moved = GrayImage::from_fn_clamped(w, h, shifted);

    let holes = match dist {
        Some(d) => sample_training_mask_for(sub_seed(seed, 1), d, &moved.threshold(0.5))?,
        None => Mask::empty(w, h),
    };
    let noise =
        if noise_sigma > 0.0 { normal_vec(&mut rng::seeded(sub_seed(seed, 2)), w * h) } else { vec![0.0; w * h] };
    let out = GrayImage::from_fn_clamped(w, h, |x, y| {
        let i = y * w + x;
        if holes.data()[i] {
            0.0
        } else {
            moved.data()[i] + noise_sigma * noise[i]
        }
    });
    Ok((out, holes))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inpaint::MaskKind;

    fn cross_sketch(n: usize) -> GrayImage {
        GrayImage::from_fn_clamped(n, n, |x, y| if x == n / 2 || y == n / 3 { 1.0 } else { 0.0 })
    }

    #[test]
    fn identity_without_augmentation() {
        let s = cross_sketch(32);
        let (out, holes) = augment_sample(&s, 9, None, 0.0, 0).unwrap();
        assert_eq!(out, s);
        assert_eq!(holes.count(), 0);
    }

    #[test]
    fn deterministic_in_seed() {
        let s = cross_sketch(32);
        let d = MaskDistribution::default();
        let a = augment_sample(&s, 4, Some(&d), 0.05, 1).unwrap();
        let b = augment_sample(&s, 4, Some(&d), 0.05, 1).unwrap();
        assert_eq!(a, b);
        let c = augment_sample(&s, 5, Some(&d), 0.05, 1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn jitter_is_a_bounded_translation() {
        let s = cross_sketch(32);
        for seed in 0..20 {
            let (out, _) = augment_sample(&s, seed, None, 0.0, 1).unwrap();
            let matches = |dx: i64, dy: i64| {
                (0..32).all(|y| {
                    (0..32).all(|x| {
                        let (sx, sy) = (x as i64 - dx, y as i64 - dy);
                        let expect = if (0..32).contains(&sx) && (0..32).contains(&sy) {
                            s.get(sx as usize, sy as usize)
                        } else {
                            0.0
                        };
                        out.get(x, y) == expect
                    })
                })
            };
            let found = (-1..=1).any(|dx| (-1..=1).any(|dy| matches(dx, dy)));
            assert!(found, "seed {seed}");
        }
    }

    #[test]
    fn holes_are_zero_and_output_in_range() {
        let s = cross_sketch(32);
        let d = MaskDistribution::of_kind(MaskKind::Rects);
        for seed in 0..50 {
            let (out, holes) = augment_sample(&s, seed, Some(&d), 0.2, 1).unwrap();
            for (v, &hole) in out.data().iter().zip(holes.data()) {
                assert!((0.0..=1.0).contains(v));
                if hole {
                    assert_eq!(*v, 0.0);
                }
            }
        }
    }
}
