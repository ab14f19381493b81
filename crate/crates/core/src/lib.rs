//! Reconstruction of candidate 3D meshes from photographs of degraded line
//! sketches.
//!
//! The pipeline runs in stages, each in its own module:
//!
//! - [`sketch`]: pigment isolation, contrast equalization, Canny edges and
//!   component cleanup turn a wall photograph into a binary sketch;
//! - [`inpaint`]: training-mask sampling, fast-marching hole filling and an
//!   optional learned kernel-prediction refinement;
//! - [`synth`]: procedural statues, a z-buffer rasterizer and dataset
//!   manifests for training without real photographs;
//! - [`diffusion`]: a small conditional DDPM generating several depth and
//!   normal variants for one sketch, with classifier-free guidance;
//! - [`geom`]: unprojection, least-squares normal integration,
//!   triangulation, smoothing and mesh export;
//! - [`pipeline`]: project persistence and end-to-end orchestration.
//!
//! [`raster`] and [`tensor`] hold the shared data types, and [`nn`] the
//! manually differentiated layers used by both learned models.

// parameter guards use negated comparisons so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

// lets oracle sources shared with integration tests name this crate
extern crate self as forge_core;

pub mod diffusion;
pub mod error;
pub mod geom;
pub mod inpaint;
pub mod nn;
pub mod pipeline;
pub mod raster;
pub mod rng;
pub mod sketch;
pub mod synth;
pub mod tensor;

pub use error::{Error, Result};
pub use geom::PointCloud;
pub use raster::{DepthMap, GrayImage, Mask, NormalMap, RgbImage};
pub use synth::{CameraIntrinsics, Pose, TriangleMesh};
pub use tensor::Tensor;
