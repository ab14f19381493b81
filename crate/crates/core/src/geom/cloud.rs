use crate::error::{Error, Result};
use crate::raster::{DepthMap, NormalMap};
use crate::synth::CameraIntrinsics;

/// Camera-space points with optional normals and their source pixels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<[f32; 3]>,
    pub normals: Option<Vec<[f32; 3]>>,
    pub source_pixel: Vec<(u32, u32)>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Back-projects every valid pixel through its center. Normals are taken
/// from `n` where it is valid too; otherwise the point gets `(0, 0, -1)`.
pub fn unproject_depth(d: &DepthMap, k: &CameraIntrinsics, n: Option<&NormalMap>) -> Result<PointCloud> {
    let (w, h) = (d.width(), d.height());
    if k.width != w || k.height != h {
        return Err(Error::ShapeMismatch { expected: format!("{}x{}", k.width, k.height), actual: format!("{w}x{h}") });
    }
    if let Some(n) = n {
        if n.width() != w || n.height() != h {
            return Err(Error::ShapeMismatch {
                expected: format!("{w}x{h}"),
                actual: format!("{}x{}", n.width(), n.height()),
            });
        }
    }
    let mut cloud = PointCloud { normals: n.map(|_| Vec::new()), ..Default::default() };
    for v in 0..h {
        for u in 0..w {
            let Some(z) = d.get(u, v) else { continue };
            let p = k.unproject(u, v, z as f64);
            cloud.points.push([p[0] as f32, p[1] as f32, p[2] as f32]);
            cloud.source_pixel.push((u as u32, v as u32));
            if let (Some(out), Some(n)) = (cloud.normals.as_mut(), n) {
                out.push(n.get(u, v).unwrap_or([0.0, 0.0, -1.0]));
            }
        }
    }
    Ok(cloud)
}

/// Symmetric mean nearest-neighbor distance between two point sets.
pub fn chamfer_distance(a: &[[f32; 3]], b: &[[f32; 3]]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Empty("chamfer distance of an empty point set".into()));
    }
    let one_way = |from: &[[f32; 3]], to: &[[f32; 3]]| {
        let mut sum = 0.0f64;
        for p in from {
            let mut best = f64::INFINITY;
            for q in to {
                let d2: f64 = (0..3).map(|c| (p[c] as f64 - q[c] as f64).powi(2)).sum();
                best = best.min(d2);
            }
            sum += best.sqrt();
        }
        sum / from.len() as f64
    };
    Ok(0.5 * (one_way(a, b) + one_way(b, a)))
}
