//! End-to-end execution of every stage on one photo.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::project::{InpaintConfig, Project, ReconstructConfig};
use super::stages::{self, ModelHandle};
use super::store::ProjectStore;
use super::Stage;
use crate::diffusion::SampleConfig;
use crate::error::{Error, Result};
use crate::inpaint::KernelModel;
use crate::sketch::ExtractConfig;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub extract: ExtractConfig,
    pub inpaint: InpaintConfig,
    pub generate: SampleConfig,
    pub reconstruct: ReconstructConfig,
}

/// Where the generation model comes from. A path is read only when the
/// generate stage starts, so a missing file fails that stage.
#[derive(Clone)]
pub enum ModelSource {
    Path(PathBuf),
    Loaded(Arc<ModelHandle>),
}

impl ModelSource {
    pub fn resolve(&self) -> Result<Arc<ModelHandle>> {
        match self {
            ModelSource::Path(p) => Ok(Arc::new(ModelHandle::load(p)?)),
            ModelSource::Loaded(m) => Ok(Arc::clone(m)),
        }
    }
}

fn at(stage: Stage) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        e @ Error::Stage { .. } => e,
        e => Error::Stage { stage, source: Box::new(e) },
    }
}

/// Runs photo → sketch → (mask) → restored → variants → meshes in project
/// `id`, creating it when absent and replacing earlier artifacts otherwise.
/// Every error names the stage it came from; artifacts of completed stages
/// stay in place.
#[allow(clippy::too_many_arguments)]
pub fn run_pipeline(
    store: &ProjectStore,
    id: &str,
    name: &str,
    created_at: u64,
    photo_png: &[u8],
    mask_png: Option<&[u8]>,
    model: &ModelSource,
    kernel: Option<&KernelModel<f32>>,
    cfg: &PipelineConfig,
    mut progress: impl FnMut(usize, usize),
) -> Result<Project> {
    if !store.exists(id) {
        store.create(id, name, created_at)?;
    }
    stages::set_photo(store, id, photo_png).map_err(at(Stage::Photo))?;
    stages::extract(store, id, &cfg.extract).map_err(at(Stage::Extract))?;
    if let Some(m) = mask_png {
        stages::set_mask(store, id, m).map_err(at(Stage::Mask))?;
    }
    stages::inpaint(store, id, &cfg.inpaint, kernel).map_err(at(Stage::Inpaint))?;
    let handle = model.resolve().map_err(at(Stage::Generate))?;
    let run = stages::generate(store, id, &handle, &cfg.generate, &mut progress).map_err(at(Stage::Generate))?;
    for k in 0..cfg.generate.n_samples {
        stages::reconstruct(store, id, run, k, &cfg.reconstruct).map_err(at(Stage::Export))?;
    }
    store.load(id)
}
