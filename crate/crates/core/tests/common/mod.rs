#![allow(dead_code)]

use forge_core::diffusion::{DenoiserNet, Model, NoiseSchedule, TrainingInfo};
use forge_core::raster::encode_rgb8;
use forge_core::synth::{
    derive_sketch, generate_procedural_statue, rasterize_depth_normal, sketch_to_photo, view_pose, SketchParams,
    StatueConfig,
};
use forge_core::{CameraIntrinsics, DepthMap, GrayImage, NormalMap};

pub const NEAR: f32 = 1.0;
pub const FAR: f32 = 6.0;

pub struct StatueView {
    pub k: CameraIntrinsics,
    pub depth: DepthMap,
    pub normals: NormalMap,
    pub sketch: GrayImage,
}

/// Frontal render of procedural statue `seed` at `r x r`.
pub fn statue_view(seed: u64, r: usize) -> StatueView {
    let k = CameraIntrinsics::square(r);
    let (mesh, params) = generate_procedural_statue(seed, &StatueConfig::default());
    let pose = view_pose(&k, params.height, 0.0, 0.0, 0.75).unwrap();
    let (depth, normals) = rasterize_depth_normal(&mesh, &k, &pose, NEAR, FAR).unwrap();
    let sketch = derive_sketch(&depth, &normals, &SketchParams::default()).unwrap();
    StatueView { k, depth, normals, sketch }
}

/// PNG photo of the view's sketch, upsampled by `scale`.
pub fn photo_png(view: &StatueView, scale: usize) -> Vec<u8> {
    encode_rgb8(&sketch_to_photo(&view.sketch, scale).unwrap()).unwrap()
}

/// Untrained model with a short schedule, for plumbing tests.
pub fn tiny_model(r: usize) -> Model {
    Model::new(
        DenoiserNet::init(3),
        NoiseSchedule::linear(8, 1e-4, 0.2).unwrap(),
        r,
        NEAR,
        FAR,
        Some(CameraIntrinsics::square(r)),
        TrainingInfo::default(),
    )
    .unwrap()
}
