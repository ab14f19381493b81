use crate::error::{invalid, Result};
use crate::raster::{face_camera, DepthMap, GrayImage, NormalMap};
use crate::tensor::Tensor;

use super::{check_resolution, STATE_CHANNELS};

/// Fraction of the depth range above `near` below which a decoded pixel is
/// background.
const BACKGROUND_MARGIN: f32 = 0.01;
const MAX_DECODED_NZ: f32 = -0.05;

/// One training triple at model resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    /// `[4, R, R]` clean state.
    pub x0: Tensor,
    /// `[1, R, R]` sketch in `[0, 1]`.
    pub sketch: Tensor,
    pub tag: usize,
}

impl TrainingSample {
    pub fn new(depth: &DepthMap, normals: &NormalMap, sketch: &GrayImage, tag: usize) -> Result<Self> {
        let x0 = encode_state(depth, normals)?;
        let r = depth.width();
        if sketch.width() != r || sketch.height() != r {
            return Err(invalid("sketch size differs from the depth map"));
        }
        let sketch = Tensor::new(vec![1, r, r], sketch.data().to_vec())?;
        Ok(Self { x0, sketch, tag })
    }

    pub fn resolution(&self) -> usize {
        self.x0.shape()[2]
    }
}

/// Packs depth (mapped to `[-1, 1]` by near/far) and normals into a state.
/// Invalid pixels become depth `-1` with normal `(0, 0, -1)`.
pub fn encode_state(depth: &DepthMap, normals: &NormalMap) -> Result<Tensor> {
    let (w, h) = (depth.width(), depth.height());
    if w != h {
        return Err(invalid(format!("state must be square, got {w}x{h}")));
    }
    check_resolution(w)?;
    if normals.width() != w || normals.height() != h {
        return Err(invalid("normal map size differs from the depth map"));
    }
    let plane = w * h;
    let (near, far) = (depth.near(), depth.far());
    let mut data = vec![0.0f32; STATE_CHANNELS * plane];
    for i in 0..plane {
        let valid = depth.valid_mask()[i] && normals.valid_mask()[i];
        let (d, n) = if valid {
            let d = 2.0 * (depth.depths()[i] - near) / (far - near) - 1.0;
            (d, normals.normals()[i])
        } else {
            (-1.0, [0.0, 0.0, -1.0])
        };
        data[i] = d;
        data[plane + i] = n[0];
        data[2 * plane + i] = n[1];
        data[3 * plane + i] = n[2];
    }
    Tensor::new(vec![STATE_CHANNELS, h, w], data)
}

/// Inverse of [`encode_state`] for arbitrary (generated) states.
pub fn decode_state(x: &Tensor, near: f32, far: f32) -> Result<(DepthMap, NormalMap)> {
    let shape = x.shape();
    if shape.len() != 3 || shape[0] != STATE_CHANNELS {
        return Err(invalid(format!("state shape {shape:?} is not [4, H, W]")));
    }
    let (h, w) = (shape[1], shape[2]);
    let plane = w * h;
    let range = far - near;
    let cutoff = near + BACKGROUND_MARGIN * range;
    let mut depth = vec![0.0f32; plane];
    let mut valid = vec![false; plane];
    let mut normals = vec![[0.0f32, 0.0, -1.0]; plane];
    let d = x.data();
    for i in 0..plane {
        let v = d[i].clamp(-1.0, 1.0);
        let z = (near + (v + 1.0) * 0.5 * range).clamp(near, far);
        if z >= cutoff {
            depth[i] = z;
            valid[i] = true;
            normals[i] = face_camera([d[plane + i], d[2 * plane + i], d[3 * plane + i]], MAX_DECODED_NZ);
        }
    }
    let depth = DepthMap::new(w, h, depth, valid.clone(), near, far)?;
    let normals = NormalMap::new(w, h, normals, valid)?;
    Ok((depth, normals))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn state_with(depth: f32, n: [f32; 3]) -> Tensor {
        let r = 16;
        let p = r * r;
        let mut data = vec![depth; 4 * p];
        for i in 0..p {
            data[p + i] = n[0];
            data[2 * p + i] = n[1];
            data[3 * p + i] = n[2];
        }
        Tensor::new(vec![4, r, r], data).unwrap()
    }

    #[test]
    fn minus_one_is_background() {
        let (d, n) = decode_state(&state_with(-1.0, [0.0, 0.0, -1.0]), 1.0, 6.0).unwrap();
        assert_eq!(d.valid_count(), 0);
        assert!(n.valid_mask().iter().all(|v| !v));
    }

    #[test]
    fn plus_one_is_far() {
        let (d, _) = decode_state(&state_with(1.0, [0.0, 0.0, -1.0]), 1.0, 6.0).unwrap();
        assert!(d.depths().iter().all(|&z| z == 6.0));
        // out-of-range values clamp
        let (d, _) = decode_state(&state_with(3.0, [0.0, 0.0, -1.0]), 1.0, 6.0).unwrap();
        assert!(d.depths().iter().all(|&z| z == 6.0));
    }

    #[test]
    fn raw_normal_is_renormalized() {
        let (_, n) = decode_state(&state_with(0.0, [0.2, 0.1, -2.0]), 1.0, 6.0).unwrap();
        let len = (0.04f64 + 0.01 + 4.0).sqrt();
        let expect = [0.2 / len, 0.1 / len, -2.0 / len];
        let got = n.get(3, 3).unwrap();
        for k in 0..3 {
            assert!((got[k] as f64 - expect[k]).abs() < 1e-3);
        }
        assert!((got[0] - 0.0995).abs() < 1e-3 && (got[2] + 0.9938).abs() < 1e-3);
    }

    #[test]
    fn grazing_normals_are_turned_toward_camera() {
        let (_, n) = decode_state(&state_with(0.0, [1.0, 0.0, 0.3]), 1.0, 6.0).unwrap();
        let got = n.get(0, 0).unwrap();
        assert!(got[2] <= -0.05 + 1e-6);
    }

    #[test]
    fn encode_decode_round_trip() {
        let r = 16;
        let p = r * r;
        let depths: Vec<f32> = (0..p).map(|i| 2.0 + (i % 7) as f32 * 0.25).collect();
        let valid: Vec<bool> = (0..p).map(|i| i % 5 != 0).collect();
        let dm = DepthMap::new(r, r, depths, valid.clone(), 1.0, 6.0).unwrap();
        let nm = NormalMap::new(r, r, vec![[0.6, 0.0, -0.8]; p], valid.clone()).unwrap();
        let x = encode_state(&dm, &nm).unwrap();
        let (d2, n2) = decode_state(&x, 1.0, 6.0).unwrap();
        assert_eq!(d2.valid_mask(), &valid[..]);
        for (i, _) in valid.iter().enumerate().filter(|(_, &v)| v) {
            assert!((d2.depths()[i] - dm.depths()[i]).abs() < 1e-5);
            assert!((n2.normals()[i][0] - 0.6).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        let dm = DepthMap::invalid(24, 24, 1.0, 2.0).unwrap();
        let nm = NormalMap::new(24, 24, vec![[0.0, 0.0, -1.0]; 576], vec![false; 576]).unwrap();
        assert!(encode_state(&dm, &nm).is_err());
    }
}
