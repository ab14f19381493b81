//! Procedural statues assembled from parametric parts.
//!
//! World frame: Y up, the figure stands on `y = 0` facing `-Z`. All parts
//! are tessellated independently and concatenated; overlapping parts are
//! resolved by the z-buffer at render time.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::mesh::TriangleMesh;
use crate::rng::{self, Rng};

/// Whether a part is sampled, forced on, or forced off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartChoice {
    #[default]
    Random,
    On,
    Off,
}

impl PartChoice {
    fn decide(self, r: &mut Rng, p: f64) -> bool {
        let u: f64 = r.random();
        match self {
            PartChoice::Random => u < p,
            PartChoice::On => true,
            PartChoice::Off => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StatueConfig {
    pub pedestal: PartChoice,
    pub torso: PartChoice,
    pub head: PartChoice,
    pub arms: PartChoice,
    pub robe: PartChoice,
    /// Legs are only built for unrobed figures.
    pub legs: PartChoice,
    pub seated: PartChoice,
    pub bust: PartChoice,
    /// Segments around each part.
    pub segments: usize,
    /// Rings from pole to pole.
    pub rings: usize,
}

impl Default for StatueConfig {
    fn default() -> Self {
        Self {
            pedestal: PartChoice::Random,
            torso: PartChoice::Random,
            head: PartChoice::Random,
            arms: PartChoice::Random,
            robe: PartChoice::Random,
            legs: PartChoice::Random,
            seated: PartChoice::Random,
            bust: PartChoice::Random,
            segments: 24,
            rings: 12,
        }
    }
}

impl StatueConfig {
    pub fn only_pedestal() -> Self {
        Self {
            pedestal: PartChoice::On,
            torso: PartChoice::Off,
            head: PartChoice::Off,
            arms: PartChoice::Off,
            robe: PartChoice::Off,
            legs: PartChoice::Off,
            seated: PartChoice::Off,
            bust: PartChoice::Off,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedestalParams {
    pub width: f64,
    pub depth: f64,
    pub height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorsoParams {
    pub radii: [f64; 3],
    /// Superellipsoid exponents (vertical, horizontal).
    pub exponents: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmParams {
    /// Elevation of the upper arm from hanging straight down, radians.
    pub shoulder: f64,
    /// Forward swing of the upper arm, radians.
    pub swing: f64,
    /// Elbow flexion, radians.
    pub elbow: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RobeParams {
    pub top_radius: f64,
    pub bottom_radius: f64,
    /// Amplitude and angular frequency of the folds.
    pub fold_amplitude: f64,
    pub fold_count: u32,
    pub fold_phase: f64,
}

/// Everything sampled for one statue. Lengths are in meters before height
/// normalization; `height` is the normalized overall height.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatueParams {
    pub seed: u64,
    pub pedestal: Option<PedestalParams>,
    pub torso: Option<TorsoParams>,
    pub head_radius: Option<f64>,
    pub arms: Option<[ArmParams; 2]>,
    pub arm_radius: f64,
    pub robe: Option<RobeParams>,
    pub legs: bool,
    pub seated: bool,
    pub bust: bool,
    /// Final overall height after normalization.
    pub height: f64,
    pub tag_id: usize,
}

/// Shoulder elevation above which an arm counts as raised.
const RAISED: f64 = 100f64 * PI / 180.0;

impl StatueParams {
    /// The conditioning tag implied by the parts, most specific first.
    pub fn derive_tag(&self) -> usize {
        let has_figure = self.torso.is_some() || self.head_radius.is_some() || self.robe.is_some();
        if self.bust && self.torso.is_some() && self.head_radius.is_some() {
            5
        } else if self.seated && has_figure {
            4
        } else if self.arms.is_some_and(|a| a.iter().any(|arm| arm.shoulder > RAISED)) {
            3
        } else if self.robe.is_some() {
            2
        } else if self.pedestal.is_some() {
            6
        } else {
            1
        }
    }
}

/// Deterministic in `seed`. The mesh height is normalized into `[1.5, 2.2]`
/// meters and centered on the vertical axis.
pub fn generate_procedural_statue(seed: u64, cfg: &StatueConfig) -> (TriangleMesh, StatueParams) {
    let mut r = rng::seeded(rng::sub_seed(seed, 0x57a7));
    let segs = cfg.segments.max(3);
    let rings = cfg.rings.max(2);

    let bust = cfg.bust.decide(&mut r, 0.12);
    let seated = !bust && cfg.seated.decide(&mut r, 0.2);
    let pedestal = cfg.pedestal.decide(&mut r, 0.5).then(|| PedestalParams {
        width: r.random_range(0.5..0.8),
        depth: r.random_range(0.4..0.7),
        height: r.random_range(0.2..0.5),
    });
    let torso = cfg.torso.decide(&mut r, 0.95).then(|| TorsoParams {
        radii: [r.random_range(0.17..0.24), r.random_range(0.26..0.34), r.random_range(0.11..0.16)],
        exponents: [r.random_range(0.6..1.2), r.random_range(0.6..1.2)],
    });
    let head_radius = cfg.head.decide(&mut r, 0.95).then(|| r.random_range(0.1..0.13));
    let arm_radius = r.random_range(0.04..0.06);
    let sample_arm = |r: &mut Rng| {
        let raised = r.random::<f64>() < 0.3;
        ArmParams {
            shoulder: if raised {
                r.random_range(110f64..160.0).to_radians()
            } else {
                r.random_range(5f64..45.0).to_radians()
            },
            swing: r.random_range(-20f64..40.0).to_radians(),
            elbow: r.random_range(0f64..90.0).to_radians(),
        }
    };
    let arms = (!bust && cfg.arms.decide(&mut r, 0.9)).then(|| [sample_arm(&mut r), sample_arm(&mut r)]);
    let robe = (!bust && cfg.robe.decide(&mut r, 0.55)).then(|| RobeParams {
        top_radius: r.random_range(0.16..0.22),
        bottom_radius: r.random_range(0.26..0.4),
        fold_amplitude: r.random_range(0.005..0.03),
        fold_count: r.random_range(5..11),
        fold_phase: r.random_range(0.0..TAU),
    });
    let legs = !bust && robe.is_none() && cfg.legs.decide(&mut r, 0.95);
    let target_height = r.random_range(1.5..2.2);

    let mut params = StatueParams {
        seed,
        pedestal,
        torso,
        head_radius,
        arms,
        arm_radius,
        robe,
        legs,
        seated,
        bust,
        height: target_height,
        tag_id: 0,
    };
    params.tag_id = params.derive_tag();

    let mut parts = Vec::new();
    let base = pedestal.map_or(0.0, |p| p.height);
    if let Some(p) = pedestal {
        parts.push(box_mesh([-p.width / 2.0, 0.0, -p.depth / 2.0], [p.width / 2.0, p.height, p.depth / 2.0]));
    }

    // vertical layout of the figure above the base
    let lower = if bust {
        0.0
    } else if seated {
        0.45
    } else {
        0.85
    };
    let torso_radii = torso.map_or([0.2, 0.3, 0.13], |t| t.radii);
    let torso_center = [0.0, base + lower + torso_radii[1] * 0.9, 0.0];
    let shoulder_y = torso_center[1] + torso_radii[1] * 0.7;

    if seated {
        let seat_h = lower - 0.05;
        parts.push(box_mesh([-0.25, base, -0.1], [0.25, base + seat_h, 0.35]));
    }
    if let Some(rb) = robe {
        let (y0, y1) = if seated { (base + lower - 0.1, torso_center[1]) } else { (base, torso_center[1]) };
        parts.push(robe_mesh(&rb, y0, y1, segs, rings));
    }
    if legs {
        for side in [-1.0, 1.0] {
            let hip = [side * 0.09, base + lower + 0.05, 0.0];
            if seated {
                let knee = [side * 0.1, base + lower, -0.42];
                let foot = [side * 0.1, base + 0.05, -0.45];
                parts.push(capsule_mesh(hip, knee, 0.075, segs, rings));
                parts.push(capsule_mesh(knee, foot, 0.06, segs, rings));
            } else {
                let knee = [side * 0.1, base + lower * 0.5, -0.02];
                let foot = [side * 0.11, base + 0.06, 0.0];
                parts.push(capsule_mesh(hip, knee, 0.08, segs, rings));
                parts.push(capsule_mesh(knee, foot, 0.065, segs, rings));
            }
        }
    }
    if let Some(t) = torso {
        parts.push(superellipsoid_mesh(torso_center, t.radii, t.exponents, segs, rings));
    }
    if let Some(hr) = head_radius {
        let c = [0.0, shoulder_y + torso_radii[1] * 0.35 + hr, -0.01];
        parts.push(sphere_mesh(c, hr, segs, rings));
    }
    if let Some(a) = arms {
        for (arm, side) in a.iter().zip([-1.0, 1.0]) {
            let shoulder = [side * (torso_radii[0] + arm_radius * 0.6), shoulder_y, 0.0];
            let upper = 0.3;
            let fore = 0.27;
            let dir_upper = arm_direction(arm.shoulder, arm.swing, side);
            let elbow = add(shoulder, scale(dir_upper, upper));
            let dir_fore = arm_direction(arm.shoulder + arm.elbow * 0.5, arm.swing + arm.elbow, side);
            let hand = add(elbow, scale(dir_fore, fore));
            parts.push(capsule_mesh(shoulder, elbow, arm_radius, segs, rings));
            parts.push(capsule_mesh(elbow, hand, arm_radius * 0.9, segs, rings));
        }
    }

    let mut mesh = TriangleMesh::default();
    for p in &parts {
        mesh.append(p);
    }
    normalize_height(&mut mesh, target_height);
    drop_degenerate(&mut mesh);
    mesh.compute_vertex_normals();
    (mesh, params)
}

/// Unit direction of a limb: `elevation` from hanging straight down,
/// splayed outward on `side`, then tilted forward (toward `-Z`) by `swing`.
fn arm_direction(elevation: f64, swing: f64, side: f64) -> [f64; 3] {
    let (se, ce) = elevation.sin_cos();
    let (ss, cs) = swing.sin_cos();
    [side * se * cs, -ce * cs, -ss]
}

fn unit(a: [f64; 3]) -> [f64; 3] {
    let l = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    [a[0] / l, a[1] / l, a[2] / l]
}

fn add(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn to32(p: [f64; 3]) -> [f32; 3] {
    [p[0] as f32, p[1] as f32, p[2] as f32]
}

/// Scales uniformly about the base so the height equals `target`, and
/// centers the footprint on the vertical axis.
fn normalize_height(mesh: &mut TriangleMesh, target: f64) {
    let Some((lo, hi)) = mesh.bounds() else {
        return;
    };
    let h = (hi[1] - lo[1]) as f64;
    if h <= 0.0 {
        return;
    }
    let s = target / h;
    let cx = (lo[0] as f64 + hi[0] as f64) / 2.0;
    let cz = (lo[2] as f64 + hi[2] as f64) / 2.0;
    for v in &mut mesh.vertices {
        *v = to32([(v[0] as f64 - cx) * s, (v[1] as f64 - lo[1] as f64) * s, (v[2] as f64 - cz) * s]);
    }
}

fn drop_degenerate(mesh: &mut TriangleMesh) {
    mesh.triangles = (0..mesh.triangles.len()).filter(|&i| mesh.area(i) > 1e-10).map(|i| mesh.triangles[i]).collect();
}

/// Closed grid mesh over `(u, v)` with `u` wrapping around; rows collapse
/// at poles are removed later as degenerate triangles. `pos(i, j)` gives
/// the vertex at segment `i`, ring `j`.
fn grid_mesh(segs: usize, rows: usize, pos: impl Fn(usize, usize) -> [f64; 3]) -> TriangleMesh {
    let mut m = TriangleMesh::default();
    for j in 0..rows {
        for i in 0..segs {
            m.vertices.push(to32(pos(i, j)));
        }
    }
    let idx = |i: usize, j: usize| (j * segs + i % segs) as u32;
    for j in 0..rows - 1 {
        for i in 0..segs {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            m.triangles.push([a, c, b]);
            m.triangles.push([a, d, c]);
        }
    }
    m
}

/// Signed power used by superquadrics.
fn spow(x: f64, e: f64) -> f64 {
    x.signum() * x.abs().powf(e)
}

pub fn superellipsoid_mesh(c: [f64; 3], radii: [f64; 3], e: [f64; 2], segs: usize, rings: usize) -> TriangleMesh {
    grid_mesh(segs, rings + 1, |i, j| {
        let v = -FRAC_PI_2 + PI * j as f64 / rings as f64;
        let u = TAU * i as f64 / segs as f64;
        let (cv, sv) = (v.cos(), v.sin());
        let (cu, su) = (u.cos(), u.sin());
        [
            c[0] + radii[0] * spow(cv, e[0]) * spow(cu, e[1]),
            c[1] + radii[1] * spow(sv, e[0]),
            c[2] + radii[2] * spow(cv, e[0]) * spow(su, e[1]),
        ]
    })
}

pub fn sphere_mesh(c: [f64; 3], radius: f64, segs: usize, rings: usize) -> TriangleMesh {
    superellipsoid_mesh(c, [radius; 3], [1.0, 1.0], segs, rings)
}

/// Cylinder from `a` to `b` with hemispherical caps.
pub fn capsule_mesh(a: [f64; 3], b: [f64; 3], radius: f64, segs: usize, rings: usize) -> TriangleMesh {
    let axis = unit([b[0] - a[0], b[1] - a[1], b[2] - a[2]]);
    let helper = if axis[1].abs() < 0.9 { [0.0, 1.0, 0.0] } else { [1.0, 0.0, 0.0] };
    let e1 = unit(super::cross(axis, helper));
    let e2 = super::cross(e1, axis);
    let half = (rings / 2).max(1);
    // rows 0..=half: cap at a; rows half+1..=2 half+1: cap at b
    grid_mesh(segs, 2 * half + 2, |i, j| {
        let (center, v) = if j <= half {
            (a, -FRAC_PI_2 + FRAC_PI_2 * j as f64 / half as f64)
        } else {
            (b, FRAC_PI_2 * (j - half - 1) as f64 / half as f64)
        };
        let u = TAU * i as f64 / segs as f64;
        let (cv, sv) = (v.cos(), v.sin());
        let ring = add(scale(e2, cv * u.cos()), scale(e1, -cv * u.sin()));
        add(center, scale(add(ring, scale(axis, sv)), radius))
    })
}

fn robe_mesh(rb: &RobeParams, y0: f64, y1: f64, segs: usize, rings: usize) -> TriangleMesh {
    let rows = rings.max(4) + 1;
    let mut m = grid_mesh(segs * 2, rows, |i, j| {
        let t = j as f64 / (rows - 1) as f64;
        let u = TAU * i as f64 / (segs * 2) as f64;
        let base = rb.bottom_radius + (rb.top_radius - rb.bottom_radius) * t.powf(0.8);
        let fold = rb.fold_amplitude * (1.0 - 0.7 * t) * (rb.fold_count as f64 * u + rb.fold_phase).sin();
        let rad = base + fold;
        [rad * u.cos(), y0 + (y1 - y0) * t, rad * u.sin() * 0.8]
    });
    // bottom cap so the hem reads as solid from below-eye views
    let centre = m.vertices.len() as u32;
    m.vertices.push(to32([0.0, y0, 0.0]));
    let n = (segs * 2) as u32;
    for i in 0..n {
        m.triangles.push([centre, i, (i + 1) % n]);
    }
    m
}

/// Axis-aligned box with four vertices per face (flat shading), 12
/// triangles wound outward.
pub fn box_mesh(lo: [f64; 3], hi: [f64; 3]) -> TriangleMesh {
    let p = |x: usize, y: usize, z: usize| {
        [if x == 0 { lo[0] } else { hi[0] }, if y == 0 { lo[1] } else { hi[1] }, if z == 0 { lo[2] } else { hi[2] }]
    };
    // each face: four corners counter-clockwise seen from outside, normal
    let faces: [([[usize; 3]; 4], [f32; 3]); 6] = [
        ([[0, 0, 0], [0, 0, 1], [0, 1, 1], [0, 1, 0]], [-1.0, 0.0, 0.0]),
        ([[1, 0, 0], [1, 1, 0], [1, 1, 1], [1, 0, 1]], [1.0, 0.0, 0.0]),
        ([[0, 0, 0], [1, 0, 0], [1, 0, 1], [0, 0, 1]], [0.0, -1.0, 0.0]),
        ([[0, 1, 0], [0, 1, 1], [1, 1, 1], [1, 1, 0]], [0.0, 1.0, 0.0]),
        ([[0, 0, 0], [0, 1, 0], [1, 1, 0], [1, 0, 0]], [0.0, 0.0, -1.0]),
        ([[0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], [0.0, 0.0, 1.0]),
    ];
    let mut m = TriangleMesh { normals: Some(Vec::new()), ..Default::default() };
    for (corners, n) in faces {
        let base = m.vertices.len() as u32;
        for c in corners {
            m.vertices.push(to32(p(c[0], c[1], c[2])));
            m.normals.as_mut().unwrap().push(n);
        }
        m.triangles.push([base, base + 1, base + 2]);
        m.triangles.push([base, base + 2, base + 3]);
    }
    m
}
