use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::camera::{CameraIntrinsics, Pose};
use super::render::{derive_sketch, rasterize_depth_normal, SketchParams};
use super::statue::{generate_procedural_statue, StatueConfig};
use crate::diffusion::{check_resolution, TrainingSample};
use crate::error::{invalid, Error, Result};
use crate::raster::{
    decode_depth_png16, decode_gray8, decode_normal_rgb8, encode_depth_png16, encode_gray8, encode_normal_rgb8,
    DepthMap, GrayImage, NormalMap,
};
use crate::rng::{self, sub_seed};

pub const DATASET_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSample {
    /// Paths are relative to the manifest directory.
    pub sketch: PathBuf,
    pub depth: PathBuf,
    pub normal: PathBuf,
    pub tag_id: usize,
    pub pose: Pose,
    /// Seed of the statue this view shows.
    pub seed: u64,
    pub statue: usize,
    pub view: usize,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub resolution: usize,
    pub near: f32,
    pub far: f32,
    pub intrinsics: CameraIntrinsics,
    pub samples: Vec<DatasetSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DatasetConfig {
    pub statues: StatueConfig,
    pub sketch: SketchParams,
    pub near: f32,
    pub far: f32,
    /// Fraction of statues held out for validation.
    pub val_fraction: f64,
    pub azimuth_deg: (f64, f64),
    pub elevation_deg: (f64, f64),
    /// Fraction of the frame height covered by the statue.
    pub fill: (f64, f64),
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            statues: StatueConfig::default(),
            sketch: SketchParams::default(),
            near: 1.0,
            far: 6.0,
            val_fraction: 0.1,
            azimuth_deg: (-45.0, 45.0),
            elevation_deg: (-10.0, 20.0),
            fill: (0.6, 0.9),
        }
    }
}

/// Camera looking at the middle of a statue of `height` from a direction
/// given by azimuth about +Y (0 = in front, on -Z) and elevation.
pub fn view_pose(k: &CameraIntrinsics, height: f64, azimuth: f64, elevation: f64, fill: f64) -> Result<Pose> {
    let distance = k.fy * height / (fill * k.height as f64);
    let target = [0.0, height / 2.0, 0.0];
    let dir = [azimuth.sin() * elevation.cos(), elevation.sin(), -azimuth.cos() * elevation.cos()];
    let eye = [target[0] + distance * dir[0], target[1] + distance * dir[1], target[2] + distance * dir[2]];
    Pose::look_at(eye, target, [0.0, 1.0, 0.0])
}

/// Renders `n_statues * views` samples into `out_dir` and writes the
/// manifest. Statues, not views, are assigned to splits.
pub fn build_dataset(
    out_dir: &Path,
    n_statues: usize,
    views: usize,
    resolution: usize,
    seed: u64,
    cfg: &DatasetConfig,
) -> Result<DatasetManifest> {
    check_resolution(resolution)?;
    if n_statues == 0 || views == 0 {
        return Err(invalid("dataset needs at least one statue and one view"));
    }
    if !(0.0..1.0).contains(&cfg.val_fraction) {
        return Err(invalid("val_fraction must lie in [0, 1)"));
    }
    let k = CameraIntrinsics::square(resolution);
    fs::create_dir_all(out_dir.join("samples"))?;

    let n_val = (n_statues as f64 * cfg.val_fraction).floor() as usize;
    let mut order: Vec<usize> = (0..n_statues).collect();
    order.shuffle(&mut rng::seeded(sub_seed(seed, u64::MAX)));
    let mut is_val = vec![false; n_statues];
    for &s in &order[..n_val] {
        is_val[s] = true;
    }

    let mut samples = Vec::with_capacity(n_statues * views);
    for (s, &val) in is_val.iter().enumerate() {
        let statue_seed = sub_seed(seed, s as u64);
        let (mesh, params) = generate_procedural_statue(statue_seed, &cfg.statues);
        let mut r = rng::seeded(sub_seed(statue_seed, 1));
        for v in 0..views {
            let az = r.random_range(cfg.azimuth_deg.0..=cfg.azimuth_deg.1).to_radians();
            let el = r.random_range(cfg.elevation_deg.0..=cfg.elevation_deg.1).to_radians();
            let fill = r.random_range(cfg.fill.0..=cfg.fill.1);
            let pose = view_pose(&k, params.height, az, el, fill)?;
            let (depth, normals) = rasterize_depth_normal(&mesh, &k, &pose, cfg.near, cfg.far)?;
            let sketch = derive_sketch(&depth, &normals, &cfg.sketch)?;
            let stem = format!("samples/s{s:04}_v{v:02}");
            let sample = DatasetSample {
                sketch: PathBuf::from(format!("{stem}_sketch.png")),
                depth: PathBuf::from(format!("{stem}_depth.png")),
                normal: PathBuf::from(format!("{stem}_normal.png")),
                tag_id: params.tag_id,
                pose,
                seed: statue_seed,
                statue: s,
                view: v,
                split: if val { Split::Val } else { Split::Train },
            };
            fs::write(out_dir.join(&sample.sketch), encode_gray8(&sketch)?)?;
            fs::write(out_dir.join(&sample.depth), encode_depth_png16(&depth)?)?;
            fs::write(out_dir.join(&sample.normal), encode_normal_rgb8(&normals)?)?;
            samples.push(sample);
        }
    }
    let manifest =
        DatasetManifest { version: DATASET_VERSION, resolution, near: cfg.near, far: cfg.far, intrinsics: k, samples };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    fs::write(out_dir.join(MANIFEST_FILE), json)?;
    Ok(manifest)
}

/// Decoded maps of one manifest entry.
#[derive(Debug, Clone)]
pub struct LoadedSample {
    pub sketch: GrayImage,
    pub depth: DepthMap,
    pub normals: NormalMap,
    pub tag_id: usize,
    pub split: Split,
}

impl LoadedSample {
    pub fn to_training(&self) -> Result<TrainingSample> {
        TrainingSample::new(&self.depth, &self.normals, &self.sketch, self.tag_id)
    }
}

/// Reads and validates a dataset directory. All missing or undecodable
/// files are reported together.
pub fn load_dataset(dir: &Path) -> Result<(DatasetManifest, Vec<LoadedSample>)> {
    let manifest: DatasetManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
    if manifest.version != DATASET_VERSION {
        return Err(invalid(format!("unsupported dataset version {}", manifest.version)));
    }
    check_resolution(manifest.resolution)?;
    let mut train_statues = Vec::new();
    let mut val_statues = Vec::new();
    let mut missing = Vec::new();
    let mut loaded = Vec::with_capacity(manifest.samples.len());
    for s in &manifest.samples {
        match s.split {
            Split::Train => train_statues.push(s.statue),
            Split::Val => val_statues.push(s.statue),
        }
        let read = |p: &Path| fs::read(dir.join(p)).ok();
        let sketch = read(&s.sketch).and_then(|b| decode_gray8(&b).ok());
        let depth = read(&s.depth).and_then(|b| decode_depth_png16(&b, manifest.near, manifest.far).ok());
        let normals = read(&s.normal).and_then(|b| decode_normal_rgb8(&b).ok());
        let r = manifest.resolution;
        let sized = |w: usize, h: usize| w == r && h == r;
        let sketch = sketch.filter(|x| sized(x.width(), x.height()));
        let depth = depth.filter(|x| sized(x.width(), x.height()));
        let normals = normals.filter(|x| sized(x.width(), x.height()));
        for (ok, p) in [(sketch.is_some(), &s.sketch), (depth.is_some(), &s.depth), (normals.is_some(), &s.normal)] {
            if !ok {
                missing.push(dir.join(p));
            }
        }
        if let (Some(sketch), Some(depth), Some(normals)) = (sketch, depth, normals) {
            loaded.push(LoadedSample { sketch, depth, normals, tag_id: s.tag_id, split: s.split });
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingFiles(missing));
    }
    if train_statues.iter().any(|s| val_statues.contains(s)) {
        return Err(invalid("a statue appears in both splits"));
    }
    Ok((manifest, loaded))
}
