use std::collections::BTreeSet;

use crate::raster::DepthMap;
use crate::synth::{CameraIntrinsics, TriangleMesh};

/// Largest depth step bridged by a quad: 2% of the map's range.
pub fn default_discontinuity(d: &DepthMap) -> f32 {
    0.02 * (d.far() - d.near())
}

/// Two camera-facing triangles per 2×2 block of valid pixels whose depths
/// differ by at most `tau`. Only referenced pixels become vertices, in
/// raster order; normals are area-weighted face averages.
pub fn triangulate_depth_grid(d: &DepthMap, k: &CameraIntrinsics, tau: f32) -> TriangleMesh {
    let (w, h) = (d.width(), d.height());
    let mut keep = Vec::new();
    let mut used = vec![false; w * h];
    for y in 0..h.saturating_sub(1) {
        for x in 0..w.saturating_sub(1) {
            let q = [y * w + x, y * w + x + 1, (y + 1) * w + x, (y + 1) * w + x + 1];
            if !q.iter().all(|&i| d.valid_mask()[i]) {
                continue;
            }
            let z = q.map(|i| d.depths()[i]);
            let lo = z.iter().copied().fold(f32::INFINITY, f32::min);
            let hi = z.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            if hi - lo > tau {
                continue;
            }
            for i in q {
                used[i] = true;
            }
            keep.push(q);
        }
    }
    let mut slot = vec![u32::MAX; w * h];
    let mut vertices = Vec::new();
    for (i, &u) in used.iter().enumerate() {
        if u {
            slot[i] = vertices.len() as u32;
            let p = k.unproject(i % w, i / w, d.depths()[i] as f64);
            vertices.push([p[0] as f32, p[1] as f32, p[2] as f32]);
        }
    }
    let mut triangles = Vec::with_capacity(keep.len() * 2);
    for [tl, tr, bl, br] in keep {
        // with y down and z forward this winding faces -z
        triangles.push([slot[tl], slot[bl], slot[tr]]);
        triangles.push([slot[tr], slot[bl], slot[br]]);
    }
    let mut mesh = TriangleMesh { vertices, normals: None, triangles };
    mesh.compute_vertex_normals();
    mesh
}

/// Uniform Laplacian smoothing with step `mu`, repeated `iterations` times.
/// Isolated vertices stay in place; normals, if present, are recomputed.
pub fn smooth_mesh(m: &TriangleMesh, iterations: usize, mu: f32) -> TriangleMesh {
    if iterations == 0 {
        return m.clone();
    }
    let mut nbrs: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); m.vertices.len()];
    for t in &m.triangles {
        for (a, b) in [(t[0], t[1]), (t[1], t[2]), (t[2], t[0])] {
            nbrs[a as usize].insert(b);
            nbrs[b as usize].insert(a);
        }
    }
    let mu = mu as f64;
    let mut v: Vec<[f64; 3]> = m.vertices.iter().map(|p| p.map(|c| c as f64)).collect();
    for _ in 0..iterations {
        let prev = v.clone();
        for (i, ns) in nbrs.iter().enumerate() {
            if ns.is_empty() {
                continue;
            }
            let mut c = [0.0; 3];
            for &j in ns {
                for a in 0..3 {
                    c[a] += prev[j as usize][a];
                }
            }
            for a in 0..3 {
                v[i][a] = prev[i][a] + mu * (c[a] / ns.len() as f64 - prev[i][a]);
            }
        }
    }
    let mut out = TriangleMesh {
        vertices: v.iter().map(|p| p.map(|c| c as f32)).collect(),
        normals: None,
        triangles: m.triangles.clone(),
    };
    if m.normals.is_some() {
        out.compute_vertex_normals();
    }
    out
}
