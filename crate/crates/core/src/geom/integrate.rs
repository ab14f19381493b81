use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::raster::{DepthMap, NormalMap};
use crate::synth::CameraIntrinsics;

const MIN_LAMBDA: f64 = 1e-6;
/// Upper bound on `n . r`; grazing normals get a large but finite slope.
const MAX_FACING: f64 = -1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegrationConfig {
    /// Weight of the depth data term; at least `1e-6` so the system is SPD.
    pub lambda: f64,
    /// Relative residual of the normal equations at which CG stops.
    pub cg_tol: f64,
    pub cg_max_iter: usize,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self { lambda: 0.1, cg_tol: 1e-8, cg_max_iter: 5000 }
    }
}

impl IntegrationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= MIN_LAMBDA && self.lambda.is_finite()) {
            return Err(invalid(format!("lambda must be >= {MIN_LAMBDA}, got {}", self.lambda)));
        }
        if !(self.cg_tol > 0.0) || self.cg_max_iter == 0 {
            return Err(invalid("CG needs a positive tolerance and iteration budget"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Least-squares system over the valid pixels.
struct System {
    /// Valid pixel index of each unknown.
    pixels: Vec<usize>,
    /// `(a, b, g)`: unknown `b` should exceed unknown `a` by `g`.
    edges: Vec<(usize, usize, f64)>,
    z0: Vec<f64>,
    lambda: f64,
}

impl System {
    fn build(n: &NormalMap, z0: &DepthMap, k: &CameraIntrinsics, lambda: f64) -> Result<Self> {
        let (w, h) = (n.width(), n.height());
        if z0.width() != w || z0.height() != h {
            return Err(Error::ShapeMismatch {
                expected: format!("{w}x{h}"),
                actual: format!("{}x{}", z0.width(), z0.height()),
            });
        }
        if n.valid_mask() != z0.valid_mask() {
            return Err(invalid("normal and depth validity masks differ"));
        }
        let mut slot = vec![usize::MAX; w * h];
        let mut pixels = Vec::new();
        for (i, &ok) in z0.valid_mask().iter().enumerate() {
            if ok {
                slot[i] = pixels.len();
                pixels.push(i);
            }
        }
        let z: Vec<f64> = pixels.iter().map(|&i| z0.depths()[i] as f64).collect();
        let s_px = median(&z) / k.fx;
        let s_py = median(&z) / k.fy;
        // slope of z along the image axes for a surface with normal n seen
        // through the pixel ray r: -n_x / (n . r), which is -n_x / n_z on axis
        let grad = |i: usize| {
            let [nx, ny, nz] = n.normals()[i].map(|c| c as f64);
            let rx = ((i % w) as f64 + 0.5 - k.cx) / k.fx;
            let ry = ((i / w) as f64 + 0.5 - k.cy) / k.fy;
            let facing = (nx * rx + ny * ry + nz).min(MAX_FACING);
            (-nx / facing * s_px, -ny / facing * s_py)
        };
        let mut edges = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if slot[i] == usize::MAX {
                    continue;
                }
                if x + 1 < w && slot[i + 1] != usize::MAX {
                    let g = 0.5 * (grad(i).0 + grad(i + 1).0);
                    edges.push((slot[i], slot[i + 1], g));
                }
                if y + 1 < h && slot[i + w] != usize::MAX {
                    let g = 0.5 * (grad(i).1 + grad(i + w).1);
                    edges.push((slot[i], slot[i + w], g));
                }
            }
        }
        Ok(Self { pixels, edges, z0: z, lambda })
    }

    fn energy(&self, z: &[f64]) -> f64 {
        let smooth: f64 = self.edges.iter().map(|&(a, b, g)| (z[b] - z[a] - g).powi(2)).sum();
        let data: f64 = z.iter().zip(&self.z0).map(|(z, z0)| (z - z0).powi(2)).sum();
        smooth + self.lambda * data
    }

    /// `A z` with `A = D^T D + lambda I`.
    fn apply(&self, z: &[f64], out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(z) {
            *o = self.lambda * v;
        }
        for &(a, b, _) in &self.edges {
            let d = z[b] - z[a];
            out[b] += d;
            out[a] -= d;
        }
    }

    fn rhs(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self.z0.iter().map(|v| self.lambda * v).collect();
        for &(a, b, g) in &self.edges {
            r[b] += g;
            r[a] -= g;
        }
        r
    }
}

fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 1.0;
    }
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        0.5 * (s[m - 1] + s[m])
    }
}

fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Depth refined by integrating the normal field, anchored to `z0`.
///
/// Target slopes are `-n_x / (n . r)` and `-n_y / (n . r)` for the pixel
/// ray `r = ((u + 0.5 - cx) / fx, (v + 0.5 - cy) / fy, 1)`, scaled by the
/// pixel size `median(z0) / f`. Only pairs of valid
/// 4-neighbors are coupled; invalid pixels are returned unchanged.
/// Refined depths are clamped to the map's range.
pub fn integrate_normals(
    n: &NormalMap,
    z0: &DepthMap,
    cfg: &IntegrationConfig,
    k: &CameraIntrinsics,
) -> Result<(DepthMap, IntegrationReport)> {
    cfg.validate()?;
    let sys = System::build(n, z0, k, cfg.lambda)?;
    let m = sys.pixels.len();
    if m == 0 {
        return Ok((z0.clone(), IntegrationReport { iterations: 0, relative_residual: 0.0 }));
    }
    let b = sys.rhs();
    let b_norm = dotp(&b, &b).sqrt();
    let mut x = sys.z0.clone();
    let mut ax = vec![0.0; m];
    sys.apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dotp(&r, &r);
    let mut ap = vec![0.0; m];
    let mut iterations = 0;
    let rel = |rr: f64| if b_norm > 0.0 { rr.sqrt() / b_norm } else { rr.sqrt() };
    while rel(rr) > cfg.cg_tol {
        if iterations == cfg.cg_max_iter {
            return Err(Error::NotConverged { residual: rel(rr), iterations });
        }
        sys.apply(&p, &mut ap);
        let alpha = rr / dotp(&p, &ap);
        for i in 0..m {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dotp(&r, &r);
        let beta = rr_new / rr;
        for i in 0..m {
            p[i] = r[i] + beta * p[i];
        }
        rr = rr_new;
        iterations += 1;
    }
    // the reported residual is recomputed from x, not the CG recursion
    sys.apply(&x, &mut ax);
    let true_rr: f64 = b.iter().zip(&ax).map(|(b, a)| (b - a).powi(2)).sum();

    let mut depth = z0.depths().to_vec();
    for (&i, &v) in sys.pixels.iter().zip(&x) {
        depth[i] = (v as f32).clamp(z0.near(), z0.far());
    }
    Ok((z0.with_depths(depth)?, IntegrationReport { iterations, relative_residual: rel(true_rr) }))
}

/// The integration energy of `z` for normals `n` and anchor `z0`.
pub fn integration_energy(
    z: &DepthMap,
    n: &NormalMap,
    z0: &DepthMap,
    cfg: &IntegrationConfig,
    k: &CameraIntrinsics,
) -> Result<f64> {
    let sys = System::build(n, z0, k, cfg.lambda)?;
    if z.valid_mask() != z0.valid_mask() {
        return Err(invalid("depth validity masks differ"));
    }
    let zv: Vec<f64> = sys.pixels.iter().map(|&i| z.depths()[i] as f64).collect();
    Ok(sys.energy(&zv))
}
