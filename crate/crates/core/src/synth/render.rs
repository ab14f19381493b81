use serde::{Deserialize, Serialize};

use super::camera::{dot, CameraIntrinsics, Pose};
use super::mesh::{to64, TriangleMesh};
use crate::error::{invalid, Result};
use crate::raster::{face_camera, DepthMap, GrayImage, NormalMap, RgbImage};

/// Vertices closer to the camera plane than this are not rasterized.
const MIN_Z: f64 = 1e-6;
const MAX_RENDER_NZ: f32 = -1e-3;

/// Z-buffered rendering of camera-space depth and camera-facing normals.
///
/// Pixel `(i, j)` is sampled at its center `(i + 0.5, j + 0.5)`. Coverage
/// follows the top-left rule, so triangles sharing an edge never both cover
/// a sample on it. Depth and normals are interpolated perspective-correctly.
/// Triangles with a vertex at or behind the camera plane are skipped, and
/// fragments outside `[near, far]` are discarded.
pub fn rasterize_depth_normal(
    mesh: &TriangleMesh,
    k: &CameraIntrinsics,
    pose: &Pose,
    near: f32,
    far: f32,
) -> Result<(DepthMap, NormalMap)> {
    if mesh.is_empty() {
        return Err(invalid("cannot render an empty mesh"));
    }
    if !(near > 0.0 && near < far) {
        return Err(invalid(format!("render range requires 0 < near < far, got [{near}, {far}]")));
    }
    k.validate()?;
    let (w, h) = (k.width, k.height);
    let cam: Vec<[f64; 3]> = mesh.vertices.iter().map(|&v| pose.apply(to64(v))).collect();
    let cam_normals: Option<Vec<[f64; 3]>> =
        mesh.normals.as_ref().map(|ns| ns.iter().map(|&n| pose.rotate(to64(n))).collect());

    let mut zbuf = vec![f64::INFINITY; w * h];
    let mut nbuf = vec![[0.0f64; 3]; w * h];
    let (near64, far64) = (near as f64, far as f64);

    for (ti, tri) in mesh.triangles.iter().enumerate() {
        let mut idx = tri.map(|i| i as usize);
        let mut p = idx.map(|i| cam[i]);
        if p.iter().any(|v| v[2] <= MIN_Z) {
            continue;
        }
        let mut s = p.map(|v| k.project(v));
        let mut area = edge(s[0], s[1], s[2]);
        if area == 0.0 {
            continue;
        }
        if area < 0.0 {
            idx.swap(1, 2);
            p.swap(1, 2);
            s.swap(1, 2);
            area = -area;
        }
        let face = {
            let e1 = [p[1][0] - p[0][0], p[1][1] - p[0][1], p[1][2] - p[0][2]];
            let e2 = [p[2][0] - p[0][0], p[2][1] - p[0][1], p[2][2] - p[0][2]];
            super::cross(e1, e2)
        };
        let normals = match &cam_normals {
            Some(ns) => idx.map(|i| ns[i]),
            None => [face; 3],
        };
        let top_left = [is_top_left(s[1], s[2]), is_top_left(s[2], s[0]), is_top_left(s[0], s[1])];
        let min_x = s.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min);
        let max_x = s.iter().map(|v| v[0]).fold(f64::NEG_INFINITY, f64::max);
        let min_y = s.iter().map(|v| v[1]).fold(f64::INFINITY, f64::min);
        let max_y = s.iter().map(|v| v[1]).fold(f64::NEG_INFINITY, f64::max);
        let x0 = (min_x - 0.5).ceil().max(0.0);
        let x1 = (max_x - 0.5).floor().min(w as f64 - 1.0);
        let y0 = (min_y - 0.5).ceil().max(0.0);
        let y1 = (max_y - 0.5).floor().min(h as f64 - 1.0);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        let _ = ti;
        for py in y0 as usize..=y1 as usize {
            for px in x0 as usize..=x1 as usize {
                let q = [px as f64 + 0.5, py as f64 + 0.5];
                let e = [edge(s[1], s[2], q), edge(s[2], s[0], q), edge(s[0], s[1], q)];
                let inside = (0..3).all(|i| e[i] > 0.0 || (e[i] == 0.0 && top_left[i]));
                if !inside {
                    continue;
                }
                let l = e.map(|v| v / area);
                let wgt = [l[0] / p[0][2], l[1] / p[1][2], l[2] / p[2][2]];
                let sum = wgt[0] + wgt[1] + wgt[2];
                let z = 1.0 / sum;
                if z < near64 || z > far64 || z >= zbuf[py * w + px] {
                    continue;
                }
                let i = py * w + px;
                zbuf[i] = z;
                let mut n = [0.0; 3];
                for c in 0..3 {
                    n[c] = (wgt[0] * normals[0][c] + wgt[1] * normals[1][c] + wgt[2] * normals[2][c]) / sum;
                }
                // back faces and flipped interpolants point away along the ray
                let ray = [q[0] - k.cx, q[1] - k.cy, 1.0];
                let ray = [ray[0] / k.fx, ray[1] / k.fy, 1.0];
                if dot(n, ray) > 0.0 {
                    n = [-n[0], -n[1], -n[2]];
                }
                nbuf[i] = n;
            }
        }
    }

    let valid: Vec<bool> = zbuf.iter().map(|z| z.is_finite()).collect();
    let depth: Vec<f32> = zbuf.iter().map(|&z| if z.is_finite() { (z as f32).clamp(near, far) } else { 0.0 }).collect();
    let normals: Vec<[f32; 3]> =
        nbuf.iter()
            .zip(&valid)
            .map(|(n, &ok)| {
                if ok {
                    face_camera([n[0] as f32, n[1] as f32, n[2] as f32], MAX_RENDER_NZ)
                } else {
                    [0.0, 0.0, -1.0]
                }
            })
            .collect();
    Ok((DepthMap::new(w, h, depth, valid.clone(), near, far)?, NormalMap::new(w, h, normals, valid)?))
}

/// Twice the signed area of `(a, b, p)`; positive when `p` is on the inner
/// side of `a -> b` for the canonical winding.
#[inline]
fn edge(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// With y pointing down and the canonical winding, a top edge runs right
/// to left horizontally and a left edge runs upward.
#[inline]
fn is_top_left(a: [f64; 2], b: [f64; 2]) -> bool {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    (dy == 0.0 && dx > 0.0) || dy < 0.0
}

/// Contour and crease thresholds for sketch derivation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SketchParams {
    /// Depth jump between 4-neighbors marking an occluding contour, meters.
    pub tau_d: f32,
    /// Normal angle between 4-neighbors marking a crease, degrees.
    pub tau_n: f32,
}

impl Default for SketchParams {
    fn default() -> Self {
        Self { tau_d: 0.15, tau_n: 50.0 }
    }
}

/// Line drawing of a rendering: a pixel is 1 when, toward any in-bounds
/// 4-neighbor, validity changes, both depths are valid and differ by more
/// than `tau_d`, or both normals are valid and differ by more than `tau_n`.
pub fn derive_sketch(d: &DepthMap, n: &NormalMap, p: &SketchParams) -> Result<GrayImage> {
    let (w, h) = (d.width(), d.height());
    if n.width() != w || n.height() != h {
        return Err(invalid("depth and normal maps differ in size"));
    }
    let cos_tau = (p.tau_n as f64).to_radians().cos();
    let dv = d.valid_mask();
    let nv = n.valid_mask();
    let edge_between = |i: usize, j: usize| {
        if dv[i] != dv[j] {
            return true;
        }
        if dv[i] && (d.depths()[i] - d.depths()[j]).abs() > p.tau_d {
            return true;
        }
        if nv[i] && nv[j] {
            let a = to64(n.normals()[i]);
            let b = to64(n.normals()[j]);
            if dot(a, b) < cos_tau {
                return true;
            }
        }
        false
    };
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let hit = (x > 0 && edge_between(i, i - 1))
                || (x + 1 < w && edge_between(i, i + 1))
                || (y > 0 && edge_between(i, i - w))
                || (y + 1 < h && edge_between(i, i + w));
            if hit {
                out[i] = 1.0;
            }
        }
    }
    GrayImage::new(w, h, out)
}

/// Plaster background and red-ochre line colors of [`sketch_to_photo`].
pub const PHOTO_PAPER: [f32; 3] = [0.92, 0.86, 0.74];
pub const PHOTO_INK: [f32; 3] = [0.70, 0.22, 0.16];

/// Paints line intensities as red pigment on plaster, each pixel upsampled
/// to a `scale x scale` block.
pub fn sketch_to_photo(lines: &GrayImage, scale: usize) -> Result<RgbImage> {
    if scale == 0 {
        return Err(invalid("photo scale must be >= 1"));
    }
    let (w, h) = (lines.width() * scale, lines.height() * scale);
    let mut data = Vec::with_capacity(3 * w * h);
    for y in 0..h {
        for x in 0..w {
            let a = lines.get(x / scale, y / scale);
            for c in 0..3 {
                data.push((1.0 - a) * PHOTO_PAPER[c] + a * PHOTO_INK[c]);
            }
        }
    }
    RgbImage::new(w, h, data)
}
