//! Brute-force Canny used as an oracle: 2D clamped indexing everywhere,
//! `atan2`-based direction bins and fixed-point hysteresis. Shared with
//! the acceptance target, so it names the crate by its external path.

use forge_core::raster::{GrayImage, Mask};
use forge_core::sketch::EdgeParams;

pub fn canny(img: &GrayImage, p: &EdgeParams) -> Mask {
    let (w, h) = (img.width() as i64, img.height() as i64);
    let px = |buf: &Vec<f32>, x: i64, y: i64| buf[(y.clamp(0, h - 1) * w + x.clamp(0, w - 1)) as usize];
    let src = img.data().to_vec();

    let r = (3.0 * p.sigma).ceil() as i64;
    let mut taps = Vec::new();
    let mut total = 0.0f64;
    for k in -r..=r {
        let v = (-((k * k) as f64) / (2.0 * p.sigma as f64 * p.sigma as f64)).exp();
        taps.push(v);
        total += v;
    }
    let taps: Vec<f32> = taps.into_iter().map(|v| (v / total) as f32).collect();

    let mut horiz = vec![0.0f32; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0f32;
            for k in -r..=r {
                s += taps[(k + r) as usize] * px(&src, x + k, y);
            }
            horiz[(y * w + x) as usize] = s;
        }
    }
    let mut smooth = vec![0.0f32; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut s = 0.0f32;
            for k in -r..=r {
                s += taps[(k + r) as usize] * px(&horiz, x, y + k);
            }
            smooth[(y * w + x) as usize] = s;
        }
    }

    let n = (w * h) as usize;
    let mut gx = vec![0.0f32; n];
    let mut gy = vec![0.0f32; n];
    let mut mag = vec![0.0f32; n];
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            let s = |dx, dy| px(&smooth, x + dx, y + dy);
            gx[i] = (s(1, -1) + 2.0 * s(1, 0) + s(1, 1)) - (s(-1, -1) + 2.0 * s(-1, 0) + s(-1, 1));
            gy[i] = (s(-1, 1) + 2.0 * s(0, 1) + s(1, 1)) - (s(-1, -1) + 2.0 * s(0, -1) + s(1, -1));
            mag[i] = (gx[i] * gx[i] + gy[i] * gy[i]).sqrt();
        }
    }
    let max = mag.iter().cloned().fold(0.0f32, f32::max);
    if max <= 0.0 {
        return Mask::empty(w as usize, h as usize);
    }
    let mag: Vec<f32> = mag.iter().map(|m| m / max).collect();

    let get = |x: i64, y: i64| {
        if x < 0 || y < 0 || x >= w || y >= h {
            0.0
        } else {
            mag[(y * w + x) as usize]
        }
    };
    let mut thin = vec![0.0f32; n];
    for y in 0..h {
        for x in 0..w {
            let i = (y * w + x) as usize;
            if mag[i] <= 0.0 {
                continue;
            }
            let mut deg = (gy[i] as f64).atan2(gx[i] as f64).to_degrees();
            if deg < 0.0 {
                deg += 180.0;
            }
            let (dx, dy) = if !(22.5..157.5).contains(&deg) {
                (1, 0)
            } else if deg < 67.5 {
                (1, 1)
            } else if deg <= 112.5 {
                (0, 1)
            } else {
                (1, -1)
            };
            if mag[i] > get(x - dx, y - dy) && mag[i] >= get(x + dx, y + dy) {
                thin[i] = mag[i];
            }
        }
    }

    let mut edge: Vec<bool> = thin.iter().map(|&m| m >= p.t_high).collect();
    loop {
        let mut changed = false;
        for y in 0..h {
            for x in 0..w {
                let i = (y * w + x) as usize;
                if edge[i] || thin[i] < p.t_low {
                    continue;
                }
                let touches = (-1..=1).any(|dy| {
                    (-1..=1).any(|dx| {
                        let (nx, ny) = (x + dx, y + dy);
                        nx >= 0 && ny >= 0 && nx < w && ny < h && edge[(ny * w + nx) as usize]
                    })
                });
                if touches {
                    edge[i] = true;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Mask::new(w as usize, h as usize, edge).unwrap()
}
