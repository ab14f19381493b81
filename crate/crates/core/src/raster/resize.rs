use super::GrayImage;
use crate::error::{invalid, Result};

/// Source coordinate and blend weight for output index `i` with
/// half-pixel-centered sampling.
#[inline]
fn source_coord(i: usize, src_len: usize, dst_len: usize) -> (usize, usize, f32) {
    let s = ((i as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5).clamp(0.0, (src_len - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, (s - i0 as f64) as f32)
}

/// Bilinear resampling with half-pixel centers and edge clamping.
pub fn resize_bilinear(img: &GrayImage, new_w: usize, new_h: usize) -> Result<GrayImage> {
    if new_w == 0 || new_h == 0 {
        return Err(invalid("resize target must be at least 1x1"));
    }
    let (w, h) = (img.width(), img.height());
    if w == 0 || h == 0 {
        return Err(invalid("cannot resize an empty image"));
    }
    let (lo, hi) = img.data().iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let cols: Vec<_> = (0..new_w).map(|x| source_coord(x, w, new_w)).collect();
    let mut out = Vec::with_capacity(new_w * new_h);
    for y in 0..new_h {
        let (y0, y1, fy) = source_coord(y, h, new_h);
        for &(x0, x1, fx) in &cols {
            let top = lerp(img.get(x0, y0), img.get(x1, y0), fx);
            let bottom = lerp(img.get(x0, y1), img.get(x1, y1), fx);
            out.push(lerp(top, bottom, fy).clamp(lo, hi));
        }
    }
    GrayImage::new(new_w, new_h, out)
}

#[inline]
fn lerp(a: f32, b: f32, t: f32) -> f32 {
    if t == 0.0 {
        a
    } else {
        a + t * (b - a)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn upsample_two_pixels() {
        let img = GrayImage::new(2, 1, vec![0.0, 1.0]).unwrap();
        let out = resize_bilinear(&img, 4, 1).unwrap();
        assert_eq!(out.data(), &[0.0, 0.25, 0.75, 1.0]);
    }

    #[test]
    fn identity_size_is_bit_identical() {
        let img = GrayImage::from_fn_clamped(7, 5, |x, y| ((x * 31 + y * 17) % 11) as f32 / 11.0);
        assert_eq!(resize_bilinear(&img, 7, 5).unwrap(), img);
    }

    #[test]
    fn constant_stays_constant() {
        let img = GrayImage::filled(5, 3, 0.3);
        let out = resize_bilinear(&img, 17, 2).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.3));
    }

    #[test]
    fn zero_target_rejected() {
        assert!(resize_bilinear(&GrayImage::filled(2, 2, 0.0), 0, 3).is_err());
    }

    proptest! {
        #[test]
        fn output_within_input_range(
            vals in proptest::collection::vec(0.0f32..=1.0, 12),
            nw in 1usize..20, nh in 1usize..20,
        ) {
            let img = GrayImage::new(4, 3, vals.clone()).unwrap();
            let out = resize_bilinear(&img, nw, nh).unwrap();
            let lo = vals.iter().cloned().fold(f32::INFINITY, f32::min);
            let hi = vals.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            prop_assert!(out.data().iter().all(|&v| v >= lo && v <= hi));
        }
    }
}
