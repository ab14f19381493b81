//! Project persistence and end-to-end orchestration.

mod jobs;
mod project;
mod run;
mod stages;
mod store;
mod train;

use std::fmt;

pub use jobs::{JobQueue, JobState, JobStatus, Progress};
pub use project::{ArtifactRef, InpaintConfig, Project, ReconstructConfig, Run, Variant, PROJECT_VERSION};
pub use run::{run_pipeline, ModelSource, PipelineConfig};
pub use stages::{
    check_sample_config, decode_variant, encode_variants, extract, extract_from_photo, generate, generate_variants,
    inpaint, mesh_media, reconstruct, reconstruct_mesh, restore_sketch, set_mask, set_photo, sketch_condition,
    ModelHandle, MAX_GUIDANCE, MEDIA_OBJ, MEDIA_PLY, MEDIA_PNG,
};
pub use store::{
    check_project_id, sha256_hex, write_atomic, ArtifactWriter, ProjectLock, ProjectStore, PROJECT_MANIFEST,
};
pub use train::{train_from_dataset, train_kernel_from_dataset};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Photo,
    Extract,
    Mask,
    Inpaint,
    Generate,
    Decode,
    Integrate,
    Triangulate,
    Export,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Photo => "photo",
            Stage::Extract => "extract",
            Stage::Mask => "mask",
            Stage::Inpaint => "inpaint",
            Stage::Generate => "generate",
            Stage::Decode => "decode",
            Stage::Integrate => "integrate",
            Stage::Triangulate => "triangulate",
            Stage::Export => "export",
        };
        f.write_str(s)
    }
}
