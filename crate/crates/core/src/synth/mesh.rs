use serde::{Deserialize, Serialize};

use super::camera::{cross, sub};
use crate::error::{invalid, Result};

/// Triangles at or below this area (m²) are degenerate.
const MIN_AREA: f64 = 1e-12;

/// Indexed triangle mesh with optional per-vertex unit normals.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<[f32; 3]>,
    pub normals: Option<Vec<[f32; 3]>>,
    pub triangles: Vec<[u32; 3]>,
}

pub(crate) fn to64(v: [f32; 3]) -> [f64; 3] {
    [v[0] as f64, v[1] as f64, v[2] as f64]
}

impl TriangleMesh {
    pub fn new(vertices: Vec<[f32; 3]>, normals: Option<Vec<[f32; 3]>>, triangles: Vec<[u32; 3]>) -> Result<Self> {
        let m = Self { vertices, normals, triangles };
        m.validate()?;
        Ok(m)
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if self.vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(invalid("non-finite vertex"));
        }
        if let Some(ns) = &self.normals {
            if ns.len() != n {
                return Err(invalid("normal count differs from vertex count"));
            }
            for v in ns {
                let l = (to64(*v)[0].powi(2) + to64(*v)[1].powi(2) + to64(*v)[2].powi(2)).sqrt();
                if (l - 1.0).abs() > 1e-5 {
                    return Err(invalid(format!("vertex normal {v:?} is not unit length")));
                }
            }
        }
        for (i, t) in self.triangles.iter().enumerate() {
            if t.iter().any(|&k| k as usize >= n) {
                return Err(invalid(format!("triangle {i} indexes past {n} vertices")));
            }
            if self.area(i) <= MIN_AREA {
                return Err(invalid(format!("triangle {i} is degenerate")));
            }
        }
        Ok(())
    }

    /// Unnormalized face normal (length = twice the area), counter-clockwise
    /// winding.
    pub fn face_normal(&self, i: usize) -> [f64; 3] {
        let [a, b, c] = self.triangles[i].map(|k| to64(self.vertices[k as usize]));
        cross(sub(b, a), sub(c, a))
    }

    pub fn area(&self, i: usize) -> f64 {
        let n = self.face_normal(i);
        0.5 * (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt()
    }

    /// Appends `other`, offsetting its indices. Normals survive only if
    /// both sides carry them.
    pub fn append(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len() as u32;
        self.normals = match (self.normals.take(), &other.normals) {
            (Some(mut a), Some(b)) => {
                a.extend_from_slice(b);
                Some(a)
            }
            (None, Some(b)) if self.vertices.is_empty() => Some(b.clone()),
            _ => None,
        };
        self.vertices.extend_from_slice(&other.vertices);
        self.triangles.extend(other.triangles.iter().map(|t| [t[0] + base, t[1] + base, t[2] + base]));
    }

    /// Axis-aligned bounds, or `None` for a vertex-free mesh.
    pub fn bounds(&self) -> Option<([f32; 3], [f32; 3])> {
        let first = *self.vertices.first()?;
        let mut lo = first;
        let mut hi = first;
        for v in &self.vertices {
            for k in 0..3 {
                lo[k] = lo[k].min(v[k]);
                hi[k] = hi[k].max(v[k]);
            }
        }
        Some((lo, hi))
    }

    /// Area-weighted vertex normals from the faces.
    pub fn compute_vertex_normals(&mut self) {
        let mut acc = vec![[0.0f64; 3]; self.vertices.len()];
        for i in 0..self.triangles.len() {
            let n = self.face_normal(i);
            for &k in &self.triangles[i] {
                for c in 0..3 {
                    acc[k as usize][c] += n[c];
                }
            }
        }
        self.normals = Some(
            acc.into_iter()
                .map(|n| {
                    let l = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
                    if l > 0.0 {
                        [(n[0] / l) as f32, (n[1] / l) as f32, (n[2] / l) as f32]
                    } else {
                        [0.0, 0.0, -1.0]
                    }
                })
                .collect(),
        );
    }
}
