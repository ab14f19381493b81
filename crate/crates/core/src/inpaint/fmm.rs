use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{invalid, Result};
use crate::raster::{GrayImage, Mask};

/// One filled pixel, in fill order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FillEvent {
    pub index: usize,
    /// Arrival time (distance to the known region) when filled.
    pub arrival: f64,
}

#[derive(Clone, Copy, PartialEq)]
struct Front {
    t: f64,
    index: usize,
}

impl Eq for Front {}

impl Ord for Front {
    // min-heap on (t, index)
    fn cmp(&self, other: &Self) -> Ordering {
        other.t.total_cmp(&self.t).then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Front {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Fills `holes` in increasing distance from the known region. Each filled
/// value is the inverse-squared-distance average of already known pixels
/// within `radius`, so it lies within the range of the known values.
pub fn inpaint_fast_marching(img: &GrayImage, holes: &Mask, radius: usize) -> Result<GrayImage> {
    Ok(inpaint_fast_marching_traced(img, holes, radius)?.0)
}

pub fn inpaint_fast_marching_traced(
    img: &GrayImage,
    holes: &Mask,
    radius: usize,
) -> Result<(GrayImage, Vec<FillEvent>)> {
    let (w, h) = (img.width(), img.height());
    if holes.width() != w || holes.height() != h {
        return Err(invalid("hole mask size differs from the image"));
    }
    if radius < 1 {
        return Err(invalid("inpainting radius must be >= 1"));
    }
    if holes.count() == holes.data().len() {
        return Err(invalid("holes cover the entire image"));
    }
    let mut out = img.data().to_vec();
    let mut known: Vec<bool> = holes.data().iter().map(|&hole| !hole).collect();
    let mut t = vec![f64::INFINITY; w * h];
    for (ti, &k) in t.iter_mut().zip(&known) {
        if k {
            *ti = 0.0;
        }
    }

    let r = radius as i64;
    let offsets: Vec<(i64, i64, f64)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|&(dx, dy)| (dx, dy) != (0, 0) && dx * dx + dy * dy <= r * r)
        .map(|(dx, dy)| (dx, dy, 1.0 / ((dx * dx + dy * dy) as f64 + 1e-6)))
        .collect();

    let mut heap = BinaryHeap::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !known[i] {
                let ti = arrival(&t, &known, w, h, x, y);
                if ti.is_finite() {
                    t[i] = ti;
                    heap.push(Front { t: ti, index: i });
                }
            }
        }
    }

    let mut trace = Vec::with_capacity(holes.count());
    while let Some(Front { t: ti, index }) = heap.pop() {
        if known[index] || ti > t[index] {
            continue;
        }
        let (x, y) = ((index % w) as i64, (index / w) as i64);
        let mut sw = 0.0f64;
        let mut sv = 0.0f64;
        for &(dx, dy, wt) in &offsets {
            let (qx, qy) = (x + dx, y + dy);
            if qx < 0 || qy < 0 || qx >= w as i64 || qy >= h as i64 {
                continue;
            }
            let q = qy as usize * w + qx as usize;
            if known[q] {
                sw += wt;
                sv += wt * out[q] as f64;
            }
        }
        // a popped pixel always has a known 4-neighbor inside the radius
        out[index] = (sv / sw) as f32;
        known[index] = true;
        trace.push(FillEvent { index, arrival: ti });
        for (nx, ny) in neighbors4(x as usize, y as usize, w, h) {
            let n = ny * w + nx;
            if !known[n] {
                let tn = arrival(&t, &known, w, h, nx, ny);
                if tn < t[n] {
                    t[n] = tn;
                    heap.push(Front { t: tn, index: n });
                }
            }
        }
    }
    let filled = GrayImage::from_fn_clamped(w, h, |x, y| out[y * w + x]);
    Ok((filled, trace))
}

fn neighbors4(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    let cand = [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)];
    cand.into_iter().filter(move |&(a, b)| a < w && b < h)
}

/// First-order upwind solution of `|grad T| = 1` from known neighbors.
fn arrival(t: &[f64], known: &[bool], w: usize, h: usize, x: usize, y: usize) -> f64 {
    let at = |a: usize, b: usize| {
        let i = b * w + a;
        if known[i] {
            t[i]
        } else {
            f64::INFINITY
        }
    };
    let mut tx = f64::INFINITY;
    if x > 0 {
        tx = tx.min(at(x - 1, y));
    }
    if x + 1 < w {
        tx = tx.min(at(x + 1, y));
    }
    let mut ty = f64::INFINITY;
    if y > 0 {
        ty = ty.min(at(x, y - 1));
    }
    if y + 1 < h {
        ty = ty.min(at(x, y + 1));
    }
    if tx.is_finite() && ty.is_finite() && (tx - ty).abs() < 1.0 {
        let d = tx - ty;
        (tx + ty + (2.0 - d * d).sqrt()) / 2.0
    } else {
        tx.min(ty) + 1.0
    }
}
