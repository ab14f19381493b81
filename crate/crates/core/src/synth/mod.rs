//! Procedural training data: statue meshes, depth/normal rendering, sketch
//! derivation, augmentation and dataset manifests.

mod augment;
mod camera;
mod dataset;
mod mesh;
mod render;
mod statue;

pub use augment::augment_sample;
pub use camera::{CameraIntrinsics, Pose};
pub use dataset::{
    build_dataset, load_dataset, view_pose, DatasetConfig, DatasetManifest, DatasetSample, LoadedSample, Split,
    DATASET_VERSION, MANIFEST_FILE,
};
pub use mesh::TriangleMesh;
pub use render::{derive_sketch, rasterize_depth_normal, sketch_to_photo, SketchParams, PHOTO_INK, PHOTO_PAPER};
pub use statue::{
    box_mesh, capsule_mesh, generate_procedural_statue, sphere_mesh, superellipsoid_mesh, ArmParams, PartChoice,
    PedestalParams, RobeParams, StatueConfig, StatueParams, TorsoParams,
};

pub(crate) use camera::cross;
