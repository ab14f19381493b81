//! Pixel grids shared by every stage of the pipeline.
//!
//! All grids are row-major with `index = y * width + x`. Values are `f32`.
//! Camera-space conventions: the camera looks along +Z, image `v` points
//! down, and valid normals face the camera (`n_z < 0`).

mod codec;
mod resize;

pub use codec::{
    decode_depth_png16, decode_gray8, decode_mask_png, decode_normal_rgb8, decode_rgb8, encode_depth_png16,
    encode_gray8, encode_mask_png, encode_normal_rgb8, encode_rgb8,
};
pub use resize::resize_bilinear;

use crate::error::{invalid, Result};

/// Single-channel image with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(invalid(format!("gray image data length {} != {}x{}", data.len(), width, height)));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(invalid(format!("gray value {v} outside [0,1]")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self { width, height, data: vec![value.clamp(0.0, 1.0); width * height] }
    }

    /// Builds an image from arbitrary values, clamping into `[0, 1]`.
    /// Non-finite values become 0.
    pub fn from_fn_clamped(width: usize, height: usize, f: impl Fn(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let v = f(x, y);
                data.push(if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 });
            }
        }
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    /// Thresholds at `level`: pixels strictly above it become `true`.
    pub fn threshold(&self, level: f32) -> Mask {
        Mask { width: self.width, height: self.height, data: self.data.iter().map(|&v| v > level).collect() }
    }
}

/// Three-channel image with interleaved RGB values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != 3 * width * height {
            return Err(invalid(format!("rgb image data length {} != 3x{}x{}", data.len(), width, height)));
        }
        if let Some(v) = data.iter().find(|v| !(v.is_finite() && (0.0..=1.0).contains(*v))) {
            return Err(invalid(format!("rgb value {v} outside [0,1]")));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = 3 * (y * self.width + x);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Boolean grid. For inpainting `true` marks an unknown pixel; for edge
/// detection `true` marks an edge pixel.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != width * height {
            return Err(invalid(format!("mask data length {} != {}x{}", data.len(), width, height)));
        }
        Ok(Self { width, height, data })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![false; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [bool] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn coverage(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.count() as f64 / self.data.len() as f64
        }
    }

    /// Renders as a gray image: `true` → 1, `false` → 0.
    pub fn to_gray(&self) -> GrayImage {
        GrayImage {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }
}

/// Per-pixel camera-space Z in meters with a validity channel.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    depth: Vec<f32>,
    valid: Vec<bool>,
    near: f32,
    far: f32,
}

impl DepthMap {
    pub fn new(width: usize, height: usize, depth: Vec<f32>, valid: Vec<bool>, near: f32, far: f32) -> Result<Self> {
        if !(near > 0.0 && near < far && far.is_finite()) {
            return Err(invalid(format!("depth range requires 0 < near < far, got [{near}, {far}]")));
        }
        if depth.len() != width * height || valid.len() != width * height {
            return Err(invalid("depth map buffers do not match dimensions"));
        }
        for (d, &ok) in depth.iter().zip(&valid) {
            if ok && !(d.is_finite() && *d >= near && *d <= far) {
                return Err(invalid(format!("valid depth {d} outside [{near}, {far}]")));
            }
        }
        Ok(Self { width, height, depth, valid, near, far })
    }

    /// An all-invalid map.
    pub fn invalid(width: usize, height: usize, near: f32, far: f32) -> Result<Self> {
        Self::new(width, height, vec![0.0; width * height], vec![false; width * height], near, far)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn near(&self) -> f32 {
        self.near
    }

    pub fn far(&self) -> f32 {
        self.far
    }

    pub fn depths(&self) -> &[f32] {
        &self.depth
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    /// Depth at (x, y) if valid.
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.depth[i])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.iter().filter(|&&v| v).count()
    }

    /// Replaces depths, clamping valid entries into `[near, far]`.
    pub fn with_depths(&self, depth: Vec<f32>) -> Result<Self> {
        if depth.len() != self.depth.len() {
            return Err(invalid("depth buffer length mismatch"));
        }
        let depth = depth
            .into_iter()
            .zip(&self.valid)
            .zip(&self.depth)
            .map(|((d, &ok), &old)| if ok { d.clamp(self.near, self.far) } else { old })
            .collect();
        Self::new(self.width, self.height, depth, self.valid.clone(), self.near, self.far)
    }
}

/// Per-pixel unit normals in camera space with a validity channel.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalMap {
    width: usize,
    height: usize,
    normals: Vec<[f32; 3]>,
    valid: Vec<bool>,
}

pub(crate) const UNIT_TOLERANCE: f32 = 1e-6;

impl NormalMap {
    pub fn new(width: usize, height: usize, normals: Vec<[f32; 3]>, valid: Vec<bool>) -> Result<Self> {
        if normals.len() != width * height || valid.len() != width * height {
            return Err(invalid("normal map buffers do not match dimensions"));
        }
        for (n, &ok) in normals.iter().zip(&valid) {
            if ok {
                let len = norm3(*n);
                if !len.is_finite() || (len - 1.0).abs() > UNIT_TOLERANCE {
                    return Err(invalid(format!("normal {n:?} is not unit length")));
                }
                if n[2] >= 0.0 {
                    return Err(invalid(format!("normal {n:?} does not face the camera (n_z >= 0)")));
                }
            }
        }
        Ok(Self { width, height, normals, valid })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn normals(&self) -> &[[f32; 3]] {
        &self.normals
    }

    pub fn valid_mask(&self) -> &[bool] {
        &self.valid
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<[f32; 3]> {
        let i = y * self.width + x;
        self.valid[i].then(|| self.normals[i])
    }

    /// Same normals restricted to `valid` (used to align with a depth map).
    pub fn with_valid(&self, valid: &[bool]) -> Result<Self> {
        let mut normals = self.normals.clone();
        for (n, (&now, &before)) in normals.iter_mut().zip(valid.iter().zip(&self.valid)) {
            if now && !before {
                *n = [0.0, 0.0, -1.0];
            }
        }
        Self::new(self.width, self.height, normals, valid.to_vec())
    }
}

#[inline]
pub(crate) fn norm3(v: [f32; 3]) -> f32 {
    let s = v[0] as f64 * v[0] as f64 + v[1] as f64 * v[1] as f64 + v[2] as f64 * v[2] as f64;
    s.sqrt() as f32
}

/// Normalizes in 64-bit so the result is unit within `f32` rounding.
#[inline]
pub(crate) fn normalize3(v: [f32; 3]) -> [f32; 3] {
    let (x, y, z) = (v[0] as f64, v[1] as f64, v[2] as f64);
    let len = (x * x + y * y + z * z).sqrt();
    if len == 0.0 || !len.is_finite() {
        return [0.0, 0.0, -1.0];
    }
    [(x / len) as f32, (y / len) as f32, (z / len) as f32]
}

/// Projects into the camera-facing hemisphere: `n_z` is clamped to at most
/// `max_nz` (negative), then the vector is renormalized.
pub(crate) fn face_camera(v: [f32; 3], max_nz: f32) -> [f32; 3] {
    let mut n = normalize3(v);
    if n[2] > max_nz {
        n[2] = max_nz;
        n = normalize3(n);
    }
    // Renormalization can lift n_z back above the bound by a rounding step.
    if n[2] >= 0.0 {
        return [0.0, 0.0, -1.0];
    }
    n
}
