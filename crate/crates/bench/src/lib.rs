//! Deterministic inputs for the stage benchmarks under `benches/`.

use forge_core::diffusion::{TrainingSample, NULL_TAG};
use forge_core::inpaint::sample_training_mask_for;
use forge_core::synth::{
    derive_sketch, generate_procedural_statue, rasterize_depth_normal, sketch_to_photo, view_pose, SketchParams,
    StatueConfig,
};
use forge_core::{CameraIntrinsics, DepthMap, GrayImage, Mask, NormalMap, RgbImage};

pub const NEAR: f32 = 1.0;
pub const FAR: f32 = 6.0;

/// Frontal render of procedural statue `seed` at `r x r`.
pub struct Scene {
    pub k: CameraIntrinsics,
    pub depth: DepthMap,
    pub normals: NormalMap,
    pub sketch: GrayImage,
}

pub fn scene(seed: u64, r: usize) -> Scene {
    let k = CameraIntrinsics::square(r);
    let (mesh, params) = generate_procedural_statue(seed, &StatueConfig::default());
    let pose = view_pose(&k, params.height, 0.0, 0.0, 0.75).expect("statue fits the frame");
    let (depth, normals) = rasterize_depth_normal(&mesh, &k, &pose, NEAR, FAR).expect("valid render");
    let sketch = derive_sketch(&depth, &normals, &SketchParams::default()).expect("valid sketch");
    Scene { k, depth, normals, sketch }
}

/// Synthetic wall photo of the scene's sketch, `scale` pixels per sketch pixel.
pub fn photo(s: &Scene, scale: usize) -> RgbImage {
    sketch_to_photo(&s.sketch, scale).expect("valid photo")
}

/// Training-mask holes over the scene's sketch.
pub fn holes(s: &Scene, seed: u64) -> Mask {
    sample_training_mask_for(seed, &Default::default(), &s.sketch.threshold(0.5)).expect("reachable coverage")
}

pub fn training_sample(s: &Scene) -> TrainingSample {
    TrainingSample::new(&s.depth, &s.normals, &s.sketch, NULL_TAG + 1).expect("consistent maps")
}
