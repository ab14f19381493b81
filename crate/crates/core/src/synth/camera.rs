use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Pinhole camera: `u = fx X / Z + cx`, `v = fy Y / Z + cy`, with pixel
/// `(i, j)` centered at `(i + 0.5, j + 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self { fx, fy, cx, cy, width, height };
        k.validate()?;
        Ok(k)
    }

    /// The dataset camera: square `r`x`r`, focal length `1.2 r`, centered.
    pub fn square(r: usize) -> Self {
        let f = 1.2 * r as f64;
        let c = r as f64 / 2.0;
        Self { fx: f, fy: f, cx: c, cy: c, width: r, height: r }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return Err(invalid("focal lengths must be positive"));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(invalid(format!(
                "principal point ({}, {}) outside {}x{}",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn project(&self, p: [f64; 3]) -> [f64; 2] {
        [self.fx * p[0] / p[2] + self.cx, self.fy * p[1] / p[2] + self.cy]
    }

    /// Camera-space point at depth `z` through the center of pixel `(u, v)`.
    #[inline]
    pub fn unproject(&self, u: usize, v: usize, z: f64) -> [f64; 3] {
        [(u as f64 + 0.5 - self.cx) * z / self.fx, (v as f64 + 0.5 - self.cy) * z / self.fy, z]
    }
}

/// World-to-camera rigid transform `x_c = R x_w + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

const ORTHO_TOL: f64 = 1e-6;

impl Pose {
    pub fn new(rotation: [[f64; 3]; 3], translation: [f64; 3]) -> Result<Self> {
        let p = Self { rotation, translation };
        p.validate()?;
        Ok(p)
    }

    pub fn identity() -> Self {
        Self { rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], translation: [0.0; 3] }
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rotation;
        for i in 0..3 {
            for j in 0..3 {
                let d: f64 = (0..3).map(|k| r[k][i] * r[k][j]).sum();
                let e = if i == j { 1.0 } else { 0.0 };
                if (d - e).abs() > ORTHO_TOL {
                    return Err(invalid("rotation is not orthonormal"));
                }
            }
        }
        if (det3(r) - 1.0).abs() > ORTHO_TOL {
            return Err(invalid("rotation determinant is not +1"));
        }
        if self.translation.iter().any(|t| !t.is_finite()) {
            return Err(invalid("translation must be finite"));
        }
        Ok(())
    }

    /// Camera on the sphere around `target`, looking at it, with image rows
    /// pointing along world `-up`.
    pub fn look_at(eye: [f64; 3], target: [f64; 3], up: [f64; 3]) -> Result<Self> {
        let f = normalize(sub(target, eye)).ok_or_else(|| invalid("eye equals target"))?;
        let r = normalize(cross(f, up)).ok_or_else(|| invalid("view direction parallel to up"))?;
        let d = cross(f, r);
        let rotation = [r, d, f];
        let translation = [-dot(r, eye), -dot(d, eye), -dot(f, eye)];
        Self::new(rotation, translation)
    }

    #[inline]
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        [dot(r[0], p) + self.translation[0], dot(r[1], p) + self.translation[1], dot(r[2], p) + self.translation[2]]
    }

    #[inline]
    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        let r = &self.rotation;
        [dot(r[0], v), dot(r[1], v), dot(r[2], v)]
    }
}

fn det3(r: &[[f64; 3]; 3]) -> f64 {
    r[0][0] * (r[1][1] * r[2][2] - r[1][2] * r[2][1]) - r[0][1] * (r[1][0] * r[2][2] - r[1][2] * r[2][0])
        + r[0][2] * (r[1][0] * r[2][1] - r[1][1] * r[2][0])
}

#[inline]
pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub(crate) fn sub(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub(crate) fn normalize(a: [f64; 3]) -> Option<[f64; 3]> {
    let l = dot(a, a).sqrt();
    (l > 1e-300 && l.is_finite()).then(|| [a[0] / l, a[1] / l, a[2] / l])
}
