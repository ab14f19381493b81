use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::raster::Mask;
use crate::rng::{self, Rng};

const MAX_ATTEMPTS: usize = 100;
const MIN_SIDE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MaskKind {
    Rects,
    Strokes,
    LineDropout,
    Mixture,
}

/// Family of training corruption masks. Mixture weights are ordered
/// rects, strokes, line-dropout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskDistribution {
    pub kind: MaskKind,
    pub coverage_min: f64,
    pub coverage_max: f64,
    pub count_range: (usize, usize),
    pub stroke_width_range: (usize, usize),
    pub mixture_weights: [f64; 3],
}

impl Default for MaskDistribution {
    fn default() -> Self {
        Self {
            kind: MaskKind::Mixture,
            coverage_min: 0.05,
            coverage_max: 0.3,
            count_range: (1, 4),
            stroke_width_range: (2, 5),
            mixture_weights: [0.4, 0.3, 0.3],
        }
    }
}

impl MaskDistribution {
    pub fn of_kind(kind: MaskKind) -> Self {
        Self { kind, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.coverage_min && self.coverage_min <= self.coverage_max && self.coverage_max < 1.0) {
            return Err(invalid(format!(
                "coverage bounds require 0 < min <= max < 1, got [{}, {}]",
                self.coverage_min, self.coverage_max
            )));
        }
        let (c0, c1) = self.count_range;
        if c0 == 0 || c0 > c1 {
            return Err(invalid("count_range must be a non-empty interval of positive counts"));
        }
        let (w0, w1) = self.stroke_width_range;
        if w0 == 0 || w0 > w1 {
            return Err(invalid("stroke_width_range must be a non-empty interval of positive widths"));
        }
        let sum: f64 = self.mixture_weights.iter().sum();
        if self.mixture_weights.iter().any(|w| *w < 0.0 || !w.is_finite()) || (sum - 1.0).abs() > 1e-9 {
            return Err(invalid("mixture weights must be non-negative and sum to 1"));
        }
        Ok(())
    }
}

/// Samples a hole mask (true = hole) whose coverage lies within
/// `[coverage_min / 2, 2 coverage_max]`. Line-dropout segments are placed
/// anywhere; see [`sample_training_mask_for`] to anchor them on a sketch.
pub fn sample_training_mask(seed: u64, dist: &MaskDistribution, w: usize, h: usize) -> Result<Mask> {
    sample_impl(seed, dist, w, h, None)
}

/// As [`sample_training_mask`], with line-dropout segments passing through
/// pixels of `sketch`.
pub fn sample_training_mask_for(seed: u64, dist: &MaskDistribution, sketch: &Mask) -> Result<Mask> {
    sample_impl(seed, dist, sketch.width(), sketch.height(), Some(sketch))
}

fn sample_impl(seed: u64, dist: &MaskDistribution, w: usize, h: usize, sketch: Option<&Mask>) -> Result<Mask> {
    dist.validate()?;
    if w < MIN_SIDE || h < MIN_SIDE {
        return Err(invalid(format!("mask must be at least {MIN_SIDE}x{MIN_SIDE}, got {w}x{h}")));
    }
    let lo = dist.coverage_min / 2.0;
    let hi = 2.0 * dist.coverage_max;
    let anchors: Vec<(usize, usize)> = sketch
        .map(|s| (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).filter(|&(x, y)| s.get(x, y)).collect())
        .unwrap_or_default();
    for attempt in 0..MAX_ATTEMPTS {
        let mut r = rng::seeded(rng::sub_seed(seed, attempt as u64));
        let kind = match dist.kind {
            MaskKind::Mixture => pick_kind(&mut r, &dist.mixture_weights),
            k => k,
        };
        let target = r.random_range(dist.coverage_min..=dist.coverage_max);
        let count = r.random_range(dist.count_range.0..=dist.count_range.1);
        let share = target * (w * h) as f64 / count as f64;
        let mut m = Mask::empty(w, h);
        for _ in 0..count {
            match kind {
                MaskKind::Rects => add_rect(&mut m, &mut r, share),
                MaskKind::Strokes => add_stroke(&mut m, &mut r, share, dist.stroke_width_range),
                _ => add_segment(&mut m, &mut r, share, dist.stroke_width_range, &anchors),
            }
        }
        let c = m.coverage();
        if c >= lo && c <= hi {
            return Ok(m);
        }
    }
    Err(Error::CoverageUnreachable { attempts: MAX_ATTEMPTS })
}

fn pick_kind(r: &mut Rng, weights: &[f64; 3]) -> MaskKind {
    let u: f64 = r.random();
    if u < weights[0] {
        MaskKind::Rects
    } else if u < weights[0] + weights[1] {
        MaskKind::Strokes
    } else {
        MaskKind::LineDropout
    }
}

/// Marks every pixel whose center lies within `radius` of `(cx, cy)`.
fn stamp_disk(m: &mut Mask, cx: f64, cy: f64, radius: f64) {
    let (w, h) = (m.width() as i64, m.height() as i64);
    let x0 = (cx - radius).floor().max(0.0) as i64;
    let x1 = ((cx + radius).ceil() as i64).min(w - 1);
    let y0 = (cy - radius).floor().max(0.0) as i64;
    let y1 = ((cy + radius).ceil() as i64).min(h - 1);
    let r2 = radius * radius;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f64 + 0.5 - cx;
            let dy = y as f64 + 0.5 - cy;
            if dx * dx + dy * dy <= r2 {
                m.set(x as usize, y as usize, true);
            }
        }
    }
}

fn add_rect(m: &mut Mask, r: &mut Rng, area: f64) {
    let (w, h) = (m.width(), m.height());
    let aspect: f64 = r.random_range(0.5..2.0);
    let rw = ((area * aspect).sqrt().round() as usize).clamp(1, w);
    let rh = ((area / rw as f64).round() as usize).clamp(1, h);
    let x0 = r.random_range(0..=w - rw);
    let y0 = r.random_range(0..=h - rh);
    for y in y0..y0 + rh {
        for x in x0..x0 + rw {
            m.set(x, y, true);
        }
    }
}

/// A random walk with slowly turning heading, stamped with a disk.
fn add_stroke(m: &mut Mask, r: &mut Rng, area: f64, widths: (usize, usize)) {
    let (w, h) = (m.width() as f64, m.height() as f64);
    let width = r.random_range(widths.0..=widths.1) as f64;
    let radius = width / 2.0;
    let length = area / width;
    let mut x = r.random_range(0.0..w);
    let mut y = r.random_range(0.0..h);
    let mut heading: f64 = r.random_range(0.0..std::f64::consts::TAU);
    let step = radius.max(1.0);
    let mut walked = 0.0;
    stamp_disk(m, x, y, radius);
    while walked < length {
        heading += r.random_range(-0.6..0.6);
        x += step * heading.cos();
        y += step * heading.sin();
        // reflect off the borders
        if !(0.0..w).contains(&x) {
            heading = std::f64::consts::PI - heading;
            x = x.clamp(0.0, w - 1e-9);
        }
        if !(0.0..h).contains(&y) {
            heading = -heading;
            y = y.clamp(0.0, h - 1e-9);
        }
        stamp_disk(m, x, y, radius);
        walked += step;
    }
}

/// Straight dilated segments centered on anchor pixels. Long budgets are
/// split into several segments no longer than half the shorter side.
fn add_segment(m: &mut Mask, r: &mut Rng, area: f64, widths: (usize, usize), anchors: &[(usize, usize)]) {
    let width = r.random_range(widths.0..=widths.1) as f64;
    let radius = width / 2.0;
    let total = area / width;
    let max_len = m.width().min(m.height()) as f64 / 2.0;
    let pieces = (total / max_len).ceil().max(1.0) as usize;
    let length = total / pieces as f64;
    for _ in 0..pieces {
        let (cx, cy) = if anchors.is_empty() {
            (r.random_range(0.0..m.width() as f64), r.random_range(0.0..m.height() as f64))
        } else {
            let (ax, ay) = anchors[r.random_range(0..anchors.len())];
            (ax as f64 + 0.5, ay as f64 + 0.5)
        };
        let angle: f64 = r.random_range(0.0..std::f64::consts::PI);
        let (dx, dy) = (angle.cos(), angle.sin());
        let n = (length / 0.5).ceil() as usize;
        for i in 0..=n {
            let s = -length / 2.0 + length * i as f64 / n.max(1) as f64;
            stamp_disk(m, cx + s * dx, cy + s * dy, radius);
        }
    }
}
