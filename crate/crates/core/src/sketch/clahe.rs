//! Contrast-limited adaptive histogram equalization.

use crate::error::{invalid, Result};
use crate::raster::GrayImage;

const BINS: usize = 256;

#[inline]
fn bin_of(v: f32) -> usize {
    ((v * BINS as f32) as usize).min(BINS - 1)
}

/// Per-tile transfer function. A tile whose pixels all fall in one bin has a
/// degenerate histogram and maps every value to itself.
enum TileMap {
    Identity,
    Table(Box<[f32; BINS]>),
}

impl TileMap {
    fn build(values: impl Iterator<Item = f32>, clip: f32) -> Self {
        let mut hist = [0.0f64; BINS];
        let mut n = 0usize;
        for v in values {
            hist[bin_of(v)] += 1.0;
            n += 1;
        }
        if hist.iter().filter(|&&c| c > 0.0).count() <= 1 {
            return TileMap::Identity;
        }
        if clip.is_finite() {
            let limit = clip as f64 * n as f64 / BINS as f64;
            let mut excess = 0.0;
            for c in &mut hist {
                if *c > limit {
                    excess += *c - limit;
                    *c = limit;
                }
            }
            let share = excess / BINS as f64;
            for c in &mut hist {
                *c += share;
            }
        }
        let total: f64 = hist.iter().sum();
        let mut table = Box::new([0.0f32; BINS]);
        let mut acc = 0.0;
        for (t, c) in table.iter_mut().zip(&hist) {
            acc += c;
            *t = (acc / total).clamp(0.0, 1.0) as f32;
        }
        TileMap::Table(table)
    }

    #[inline]
    fn apply(&self, v: f32) -> f32 {
        match self {
            TileMap::Identity => v,
            TileMap::Table(t) => t[bin_of(v)],
        }
    }
}

#[inline]
fn lerp(a: f32, b: f32, t: f32) -> f32 {
    if a == b || t == 0.0 {
        a
    } else if t == 1.0 {
        b
    } else {
        a + t * (b - a)
    }
}

/// Half-open pixel ranges of the tiles along one axis.
fn tile_bounds(len: usize, tiles: usize) -> Vec<(usize, usize)> {
    (0..tiles).map(|i| (i * len / tiles, (i + 1) * len / tiles)).collect()
}

/// Lower tile index and blend weight for pixel coordinate `p`.
#[inline]
fn locate(p: usize, centers: &[f32]) -> (usize, usize, f32) {
    let p = p as f32;
    if p <= centers[0] {
        return (0, 0, 0.0);
    }
    let last = centers.len() - 1;
    if p >= centers[last] {
        return (last, last, 0.0);
    }
    let i = centers.iter().rposition(|&c| c <= p).unwrap_or(0);
    let t = (p - centers[i]) / (centers[i + 1] - centers[i]);
    (i, i + 1, t)
}

/// CLAHE with a `tiles x tiles` grid and clip limit `clip` (multiples of the
/// mean bin count; `f32::INFINITY` disables clipping). Mappings of the four
/// nearest tile centers are blended bilinearly.
pub fn equalize_contrast(img: &GrayImage, tiles: usize, clip: f32) -> Result<GrayImage> {
    if tiles < 1 {
        return Err(invalid("tile count must be at least 1"));
    }
    if !(clip >= 1.0) {
        return Err(invalid(format!("clip limit {clip} must be >= 1")));
    }
    let (w, h) = (img.width(), img.height());
    if w < tiles || h < tiles {
        return Err(invalid(format!("image {w}x{h} smaller than {tiles}x{tiles} tile grid")));
    }
    let xb = tile_bounds(w, tiles);
    let yb = tile_bounds(h, tiles);
    let mut maps = Vec::with_capacity(tiles * tiles);
    for &(y0, y1) in &yb {
        for &(x0, x1) in &xb {
            let vals = (y0..y1).flat_map(|y| (x0..x1).map(move |x| (x, y))).map(|(x, y)| img.get(x, y));
            maps.push(TileMap::build(vals, clip));
        }
    }
    let center = |&(a, b): &(usize, usize)| (a + b) as f32 / 2.0 - 0.5;
    let xc: Vec<f32> = xb.iter().map(center).collect();
    let yc: Vec<f32> = yb.iter().map(center).collect();

    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        let (ty0, ty1, fy) = locate(y, &yc);
        for x in 0..w {
            let (tx0, tx1, fx) = locate(x, &xc);
            let v = img.get(x, y);
            let m = |ty: usize, tx: usize| maps[ty * tiles + tx].apply(v);
            let top = lerp(m(ty0, tx0), m(ty0, tx1), fx);
            let bottom = lerp(m(ty1, tx0), m(ty1, tx1), fx);
            out.push(lerp(top, bottom, fy).clamp(0.0, 1.0));
        }
    }
    GrayImage::new(w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_image_is_fixed_point() {
        let img = GrayImage::filled(17, 9, 0.37);
        let out = equalize_contrast(&img, 3, 2.0).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn two_level_single_tile_unclipped() {
        let img = GrayImage::from_fn_clamped(8, 8, |x, _| if x < 4 { 0.25 } else { 0.75 });
        let out = equalize_contrast(&img, 1, f32::INFINITY).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                let expect = if x < 4 { 0.5 } else { 1.0 };
                assert_eq!(out.get(x, y), expect);
            }
        }
    }

    #[test]
    fn grid_larger_than_image_rejected() {
        assert!(equalize_contrast(&GrayImage::filled(3, 8, 0.1), 4, 2.0).is_err());
        assert!(equalize_contrast(&GrayImage::filled(8, 8, 0.1), 0, 2.0).is_err());
        assert!(equalize_contrast(&GrayImage::filled(8, 8, 0.1), 2, 0.5).is_err());
    }

    #[test]
    fn clipping_limits_contrast_gain() {
        // low-amplitude texture gets stretched to full range without clipping
        let img = GrayImage::from_fn_clamped(20, 20, |x, _| if x % 2 == 0 { 0.11 } else { 0.10 });
        let loose = equalize_contrast(&img, 1, f32::INFINITY).unwrap();
        let tight = equalize_contrast(&img, 1, 1.0).unwrap();
        let spread = |g: &GrayImage| (g.get(0, 0) - g.get(1, 0)).abs();
        assert!(spread(&tight) < spread(&loose));
    }

    proptest! {
        #[test]
        fn output_in_unit_range(
            vals in proptest::collection::vec(0.0f32..=1.0, 24 * 24),
            tiles in 1usize..6, clip in 1.0f32..8.0,
        ) {
            let img = GrayImage::new(24, 24, vals).unwrap();
            let out = equalize_contrast(&img, tiles, clip).unwrap();
            prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}
