use serde::{Deserialize, Serialize};

use super::Stage;
use crate::diffusion::SampleConfig;
use crate::error::{Error, Result};
use crate::geom::MeshFormat;
use crate::sketch::ExtractConfig;
use crate::synth::CameraIntrinsics;

pub const PROJECT_VERSION: u32 = 1;

/// A file inside a project directory, addressed by the SHA-256 of its bytes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRef {
    pub id: String,
    /// Relative to the project directory, `/`-separated.
    pub path: String,
    pub media_type: String,
    pub size: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InpaintConfig {
    /// Neighborhood radius of the fast-marching fill, pixels.
    pub radius: usize,
}

impl Default for InpaintConfig {
    fn default() -> Self {
        Self { radius: 3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructConfig {
    /// Data weight of the normal integration.
    pub lambda: f64,
    /// Discontinuity threshold in meters; `None` uses 2% of the depth range.
    pub tau: Option<f32>,
    /// Laplacian smoothing iterations.
    pub smooth: usize,
    pub smooth_strength: f32,
    pub format: MeshFormat,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self { lambda: 0.1, tau: None, smooth: 0, smooth_strength: 0.5, format: MeshFormat::PlyBinary }
    }
}

impl ReconstructConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 1e-6 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 1e-6, got {}", self.lambda)));
        }
        if let Some(t) = self.tau {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidArgument(format!("tau must be positive, got {t}")));
            }
        }
        if !(self.smooth_strength > 0.0 && self.smooth_strength < 1.0) {
            return Err(Error::InvalidArgument("smooth_strength must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub index: usize,
    pub depth: ArtifactRef,
    pub normal: ArtifactRef,
    pub mesh: Option<ArtifactRef>,
    pub reconstruct: Option<ReconstructConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Run {
    pub index: usize,
    pub sample: SampleConfig,
    /// Hash of the model file that produced the run.
    pub model: String,
    /// Restored sketch the run was conditioned on.
    pub restored: String,
    pub near: f32,
    pub far: f32,
    pub intrinsics: CameraIntrinsics,
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Project {
    pub version: u32,
    pub id: String,
    pub name: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub photo: Option<ArtifactRef>,
    pub sketch: Option<ArtifactRef>,
    pub mask: Option<ArtifactRef>,
    pub restored: Option<ArtifactRef>,
    pub extract: Option<ExtractConfig>,
    pub inpaint: Option<InpaintConfig>,
    pub runs: Vec<Run>,
}

impl Project {
    pub fn new(id: impl Into<String>, name: impl Into<String>, created_at: u64) -> Self {
        Self {
            version: PROJECT_VERSION,
            id: id.into(),
            name: name.into(),
            created_at,
            photo: None,
            sketch: None,
            mask: None,
            restored: None,
            extract: None,
            inpaint: None,
            runs: Vec::new(),
        }
    }

    /// Every artifact the manifest references, in manifest order.
    pub fn artifacts(&self) -> Vec<&ArtifactRef> {
        let mut out: Vec<&ArtifactRef> =
            [&self.photo, &self.sketch, &self.mask, &self.restored].into_iter().flatten().collect();
        for run in &self.runs {
            for v in &run.variants {
                out.push(&v.depth);
                out.push(&v.normal);
                out.extend(v.mesh.iter());
            }
        }
        out
    }

    pub fn artifact(&self, id: &str) -> Option<&ArtifactRef> {
        self.artifacts().into_iter().find(|a| a.id == id)
    }

    pub fn run(&self, index: usize) -> Result<&Run> {
        self.runs.get(index).ok_or_else(|| Error::NotFound(format!("run {index} in project {}", self.id)))
    }

    pub fn variant(&self, run: usize, k: usize) -> Result<&Variant> {
        self.run(run)?
            .variants
            .get(k)
            .ok_or_else(|| Error::NotFound(format!("variant {k} of run {run} in project {}", self.id)))
    }

    /// Checks that everything `stage` consumes is present.
    pub fn require(&self, stage: Stage) -> Result<()> {
        let missing = |what: &str, hint: &str| Err(Error::Dependency(format!("{stage} needs {what}; {hint}")));
        match stage {
            Stage::Photo => Ok(()),
            Stage::Extract if self.photo.is_none() => missing("a photo", "upload a photo first"),
            Stage::Mask | Stage::Inpaint if self.sketch.is_none() => missing("a sketch", "run extraction first"),
            Stage::Generate if self.restored.is_none() => missing("a restored sketch", "run inpainting first"),
            Stage::Decode | Stage::Integrate | Stage::Triangulate | Stage::Export if self.runs.is_empty() => {
                missing("a generated variant", "run generation first")
            }
            _ => Ok(()),
        }
    }

    /// Structural invariants: dependency order and run/variant numbering.
    pub fn validate(&self) -> Result<()> {
        if self.version != PROJECT_VERSION {
            return Err(Error::InvalidArgument(format!("unsupported project version {}", self.version)));
        }
        let order = [
            (self.sketch.is_some(), self.photo.is_some(), "sketch without photo"),
            (self.mask.is_some(), self.sketch.is_some(), "mask without sketch"),
            (self.restored.is_some(), self.sketch.is_some(), "restored sketch without sketch"),
            (!self.runs.is_empty(), self.restored.is_some(), "runs without restored sketch"),
        ];
        for (has, needs, what) in order {
            if has && !needs {
                return Err(Error::Dependency(format!("project {}: {what}", self.id)));
            }
        }
        for (i, run) in self.runs.iter().enumerate() {
            if run.index != i {
                return Err(Error::InvalidArgument(format!("run {i} carries index {}", run.index)));
            }
            for (k, v) in run.variants.iter().enumerate() {
                if v.index != k {
                    return Err(Error::InvalidArgument(format!("variant {k} of run {i} carries index {}", v.index)));
                }
                if v.mesh.is_some() != v.reconstruct.is_some() {
                    return Err(Error::InvalidArgument(format!("variant {k} of run {i}: mesh without config")));
                }
            }
        }
        Ok(())
    }
}
