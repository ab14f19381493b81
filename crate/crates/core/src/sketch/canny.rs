//! Canny edge detector.
//!
//! Gaussian blur (radius `ceil(3 sigma)`, replicated borders), 3x3 Sobel,
//! magnitude normalized by its maximum, non-maximum suppression over four
//! quantized directions, and 8-connected hysteresis.

use super::EdgeParams;
use crate::error::{invalid, Result};
use crate::raster::{GrayImage, Mask};

const MIN_SIDE: usize = 16;
/// tan(22.5°) and tan(67.5°), the direction bin boundaries.
const TAN_22_5: f32 = 0.414_213_57;
const TAN_67_5: f32 = 2.414_213_6;

/// Normalized 1D Gaussian taps for offsets `-r..=r`, `r = ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f32) -> Vec<f32> {
    let r = (3.0 * sigma).ceil() as i64;
    let s2 = 2.0 * (sigma as f64) * (sigma as f64);
    let raw: Vec<f64> = (-r..=r).map(|k| (-((k * k) as f64) / s2).exp()).collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|w| (w / sum) as f32).collect()
}

pub fn extract_edges(img: &GrayImage, params: &EdgeParams) -> Result<Mask> {
    params.validate()?;
    let (w, h) = (img.width(), img.height());
    if w < MIN_SIDE || h < MIN_SIDE {
        return Err(invalid(format!("edge detection needs at least {MIN_SIDE}x{MIN_SIDE}, got {w}x{h}")));
    }
    let kernel = gaussian_kernel(params.sigma);
    let blurred = blur(img.data(), w, h, &kernel);
    let (gx, gy) = sobel(&blurred, w, h);
    let mut mag: Vec<f32> = gx.iter().zip(&gy).map(|(&a, &b)| (a * a + b * b).sqrt()).collect();
    let max = mag.iter().cloned().fold(0.0f32, f32::max);
    if max <= 0.0 {
        return Ok(Mask::empty(w, h));
    }
    for m in &mut mag {
        *m /= max;
    }
    let thin = suppress_non_maxima(&mag, &gx, &gy, w, h);
    Ok(hysteresis(&thin, w, h, params.t_low, params.t_high))
}

/// Separable blur: rows first, then columns, taps summed in offset order.
fn blur(src: &[f32], w: usize, h: usize, kernel: &[f32]) -> Vec<f32> {
    let r = kernel.len() / 2;
    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        let out = &mut tmp[y * w..(y + 1) * w];
        for (x, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0f32;
            if x >= r && x + r < w {
                for (k, &wk) in kernel.iter().enumerate() {
                    acc += wk * row[x + k - r];
                }
            } else {
                for (k, &wk) in kernel.iter().enumerate() {
                    let sx = (x as isize + k as isize - r as isize).clamp(0, w as isize - 1) as usize;
                    acc += wk * row[sx];
                }
            }
            *o = acc;
        }
    }
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f32;
            for (k, &wk) in kernel.iter().enumerate() {
                let sy = (y as isize + k as isize - r as isize).clamp(0, h as isize - 1) as usize;
                acc += wk * tmp[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn sobel(src: &[f32], w: usize, h: usize) -> (Vec<f32>, Vec<f32>) {
    let at = |x: isize, y: isize| {
        let x = x.clamp(0, w as isize - 1) as usize;
        let y = y.clamp(0, h as isize - 1) as usize;
        src[y * w + x]
    };
    let mut gx = vec![0.0f32; w * h];
    let mut gy = vec![0.0f32; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            gx[i] = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            gy[i] = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
        }
    }
    (gx, gy)
}

/// Offset of the neighbor in the gradient direction for the four bins.
#[inline]
fn direction_step(gx: f32, gy: f32) -> (isize, isize) {
    let (ax, ay) = (gx.abs(), gy.abs());
    if ay <= TAN_22_5 * ax {
        (1, 0)
    } else if ay >= TAN_67_5 * ax {
        (0, 1)
    } else if (gx > 0.0) == (gy > 0.0) {
        (1, 1)
    } else {
        (1, -1)
    }
}

/// Keeps a pixel when it is strictly above the neighbor behind it and at
/// least the neighbor ahead of it, which leaves a single pixel on plateaus.
fn suppress_non_maxima(mag: &[f32], gx: &[f32], gy: &[f32], w: usize, h: usize) -> Vec<f32> {
    let at = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m <= 0.0 {
                continue;
            }
            let (dx, dy) = direction_step(gx[i], gy[i]);
            let (xi, yi) = (x as isize, y as isize);
            let ahead = at(xi + dx, yi + dy);
            let behind = at(xi - dx, yi - dy);
            if m > behind && m >= ahead {
                out[i] = m;
            }
        }
    }
    out
}

fn hysteresis(mag: &[f32], w: usize, h: usize, low: f32, high: f32) -> Mask {
    let mut edges = vec![false; w * h];
    let mut stack = Vec::new();
    for (i, &m) in mag.iter().enumerate() {
        if m >= high && !edges[i] {
            edges[i] = true;
            stack.push(i);
            while let Some(j) = stack.pop() {
                let (x, y) = ((j % w) as isize, (j / w) as isize);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let k = ny as usize * w + nx as usize;
                        if !edges[k] && mag[k] >= low {
                            edges[k] = true;
                            stack.push(k);
                        }
                    }
                }
            }
        }
    }
    Mask::new(w, h, edges).expect("dimensions match")
}

#[cfg(test)]
#[path = "canny_reference.rs"]
pub(crate) mod reference;
