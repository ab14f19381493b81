//! Stage operations shared by the CLI and the HTTP service. Each one checks
//! its dependencies, runs under the project lock and clears artifacts that
//! depended on what it replaced.

use std::path::Path;

use super::project::{ArtifactRef, InpaintConfig, ReconstructConfig, Run, Variant};
use super::store::{sha256_hex, ArtifactWriter, ProjectStore};
use super::Stage;
use crate::diffusion::{decode_state, read_model, Model, SampleConfig};
use crate::error::{invalid, Error, Result};
use crate::geom::{
    default_discontinuity, export_mesh, integrate_normals, smooth_mesh, triangulate_depth_grid, IntegrationConfig,
    MeshFormat,
};
use crate::inpaint::{inpaint_fast_marching, KernelModel};
use crate::raster::{
    decode_depth_png16, decode_gray8, decode_mask_png, decode_normal_rgb8, decode_rgb8, encode_depth_png16,
    encode_gray8, encode_mask_png, encode_normal_rgb8, DepthMap, GrayImage, Mask, NormalMap, RgbImage,
};
use crate::sketch::{extract_sketch, ExtractConfig};
use crate::synth::{CameraIntrinsics, TriangleMesh};
use crate::tensor::Tensor;

pub const MEDIA_PNG: &str = "image/png";
pub const MEDIA_PLY: &str = "model/ply";
pub const MEDIA_OBJ: &str = "text/plain";

/// Upper bound on the guidance scale accepted by pipeline stages.
pub const MAX_GUIDANCE: f32 = 10.0;

/// A decoded model with the hash of its file bytes.
pub struct ModelHandle {
    pub model: Model,
    pub hash: String,
}

impl ModelHandle {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Ok(Self { model: read_model(bytes)?, hash: sha256_hex(bytes) })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::NotFound(format!("model file {}", path.display())),
            _ => e.into(),
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn intrinsics(&self) -> CameraIntrinsics {
        self.model.header.intrinsics.unwrap_or_else(|| CameraIntrinsics::square(self.model.header.resolution))
    }
}

fn stage_err(stage: Stage) -> impl FnOnce(Error) -> Error {
    move |e| match e {
        e @ (Error::Stage { .. } | Error::Dependency(_) | Error::NotFound(_)) => e,
        e => Error::Stage { stage, source: Box::new(e) },
    }
}

fn variant_dir(run: usize, k: usize) -> String {
    format!("runs/{run}/variants/{k}")
}

fn clear_runs(p: &mut super::Project, w: &ArtifactWriter) -> Result<()> {
    p.runs.clear();
    w.remove("runs")
}

fn clear_restored(p: &mut super::Project, w: &ArtifactWriter) -> Result<()> {
    p.restored = None;
    p.inpaint = None;
    w.remove("restored.png")?;
    clear_runs(p, w)
}

/// Stores `png` as the project photo, discarding everything derived from
/// an earlier photo.
pub fn set_photo(store: &ProjectStore, id: &str, png: &[u8]) -> Result<ArtifactRef> {
    decode_rgb8(png).map_err(|e| invalid(format!("photo is not a readable PNG: {e}")))?;
    store.update(id, |p, w| {
        p.sketch = None;
        p.extract = None;
        p.mask = None;
        w.remove("sketch.png")?;
        w.remove("mask.png")?;
        clear_restored(p, w)?;
        let a = w.write("photo.png", MEDIA_PNG, png)?;
        p.photo = Some(a.clone());
        Ok(a)
    })
}

pub fn extract_from_photo(photo: &RgbImage, cfg: &ExtractConfig) -> Result<Vec<u8>> {
    encode_mask_png(&extract_sketch(photo, cfg)?)
}

/// Photo to sketch. A mask of matching size survives re-extraction.
pub fn extract(store: &ProjectStore, id: &str, cfg: &ExtractConfig) -> Result<ArtifactRef> {
    cfg.validate()?;
    store
        .update(id, |p, w| {
            p.require(Stage::Extract)?;
            let photo = decode_rgb8(&w.read(p.photo.as_ref().expect("required"))?)?;
            let png = extract_from_photo(&photo, cfg)?;
            if let Some(m) = &p.mask {
                let mask = decode_mask_png(&w.read(m)?)?;
                if (mask.width(), mask.height()) != (photo.width(), photo.height()) {
                    p.mask = None;
                    w.remove("mask.png")?;
                }
            }
            clear_restored(p, w)?;
            let a = w.write("sketch.png", MEDIA_PNG, &png)?;
            p.sketch = Some(a.clone());
            p.extract = Some(*cfg);
            Ok(a)
        })
        .map_err(stage_err(Stage::Extract))
}

/// Stores a hole mask (255 = hole) of the sketch's size, re-encoded
/// canonically.
pub fn set_mask(store: &ProjectStore, id: &str, png: &[u8]) -> Result<ArtifactRef> {
    let mask = decode_mask_png(png).map_err(|e| invalid(format!("mask is not a readable PNG: {e}")))?;
    store.update(id, |p, w| {
        p.require(Stage::Mask)?;
        let sketch = decode_gray8(&w.read(p.sketch.as_ref().expect("required"))?)?;
        if (mask.width(), mask.height()) != (sketch.width(), sketch.height()) {
            return Err(invalid(format!(
                "mask is {}x{} but the sketch is {}x{}",
                mask.width(),
                mask.height(),
                sketch.width(),
                sketch.height()
            )));
        }
        clear_restored(p, w)?;
        let a = w.write("mask.png", MEDIA_PNG, &encode_mask_png(&mask)?)?;
        p.mask = Some(a.clone());
        Ok(a)
    })
}

/// Fills the holes of `sketch`; without holes the sketch is returned as is.
pub fn restore_sketch(
    sketch: &GrayImage,
    holes: Option<&Mask>,
    cfg: &InpaintConfig,
    kernel: Option<&KernelModel<f32>>,
) -> Result<GrayImage> {
    let Some(holes) = holes.filter(|m| m.count() > 0) else {
        return Ok(sketch.clone());
    };
    let coarse = inpaint_fast_marching(sketch, holes, cfg.radius)?;
    match kernel {
        Some(k) => k.refine(&coarse, holes),
        None => Ok(coarse),
    }
}

pub fn inpaint(
    store: &ProjectStore,
    id: &str,
    cfg: &InpaintConfig,
    kernel: Option<&KernelModel<f32>>,
) -> Result<ArtifactRef> {
    if cfg.radius < 1 {
        return Err(invalid("inpainting radius must be >= 1"));
    }
    store
        .update(id, |p, w| {
            p.require(Stage::Inpaint)?;
            let sketch = decode_gray8(&w.read(p.sketch.as_ref().expect("required"))?)?;
            let mask = match &p.mask {
                Some(m) => Some(decode_mask_png(&w.read(m)?)?),
                None => None,
            };
            let restored = restore_sketch(&sketch, mask.as_ref(), cfg, kernel)?;
            clear_runs(p, w)?;
            let a = w.write("restored.png", MEDIA_PNG, &encode_gray8(&restored)?)?;
            p.restored = Some(a.clone());
            p.inpaint = Some(*cfg);
            Ok(a)
        })
        .map_err(stage_err(Stage::Inpaint))
}

/// Resamples a sketch to `r x r`, taking the maximum over each cell so thin
/// lines survive downsampling.
pub fn sketch_condition(sketch: &GrayImage, r: usize) -> Result<Tensor> {
    let (w, h) = (sketch.width(), sketch.height());
    let span = |i: usize, n: usize| {
        let lo = i * n / r;
        let hi = ((i + 1) * n).div_ceil(r).max(lo + 1).min(n);
        lo..hi
    };
    let mut out = Vec::with_capacity(r * r);
    for y in 0..r {
        for x in 0..r {
            let mut m = 0.0f32;
            for sy in span(y, h) {
                for sx in span(x, w) {
                    m = m.max(sketch.get(sx, sy));
                }
            }
            out.push(m);
        }
    }
    Tensor::new(vec![1, r, r], out)
}

pub fn check_sample_config(cfg: &SampleConfig) -> Result<()> {
    cfg.validate()?;
    if cfg.guidance_scale > MAX_GUIDANCE {
        return Err(invalid(format!("guidance_scale must lie in [0, {MAX_GUIDANCE}]")));
    }
    Ok(())
}

/// Variants for one restored sketch, decoded to depth and normal maps.
pub fn generate_variants(
    model: &Model,
    restored: &GrayImage,
    cfg: &SampleConfig,
    progress: impl FnMut(usize, usize),
) -> Result<Vec<(DepthMap, NormalMap)>> {
    check_sample_config(cfg)?;
    let cond = sketch_condition(restored, model.header.resolution)?;
    let states = model.sample(&cond, cfg, progress)?;
    states.iter().map(|x| decode_state(x, model.header.near, model.header.far)).collect()
}

/// Encoded `(depth.png, normal.png)` per variant.
pub fn encode_variants(maps: &[(DepthMap, NormalMap)]) -> Result<Vec<(Vec<u8>, Vec<u8>)>> {
    maps.iter().map(|(d, n)| Ok((encode_depth_png16(d)?, encode_normal_rgb8(n)?))).collect()
}

/// Samples a new run. The lock is held only to read the restored sketch
/// and to record the result; a restored sketch replaced in between fails
/// the stage.
pub fn generate(
    store: &ProjectStore,
    id: &str,
    model: &ModelHandle,
    cfg: &SampleConfig,
    progress: impl FnMut(usize, usize),
) -> Result<usize> {
    check_sample_config(cfg)?;
    let p = store.load(id)?;
    p.require(Stage::Generate)?;
    let restored_ref = p.restored.clone().expect("required");
    let restored = decode_gray8(&store.read_artifact(id, &restored_ref)?)?;
    let maps = generate_variants(&model.model, &restored, cfg, progress).map_err(stage_err(Stage::Generate))?;
    let encoded = encode_variants(&maps).map_err(stage_err(Stage::Decode))?;
    store.update(id, |p, w| {
        if p.restored.as_ref().map(|a| &a.id) != Some(&restored_ref.id) {
            return Err(Error::Dependency("restored sketch changed during generation".into()));
        }
        let index = p.runs.len();
        w.remove(&format!("runs/{index}"))?;
        let mut variants = Vec::with_capacity(encoded.len());
        for (k, (depth, normal)) in encoded.iter().enumerate() {
            let dir = variant_dir(index, k);
            variants.push(Variant {
                index: k,
                depth: w.write(&format!("{dir}/depth.png"), MEDIA_PNG, depth)?,
                normal: w.write(&format!("{dir}/normal.png"), MEDIA_PNG, normal)?,
                mesh: None,
                reconstruct: None,
            });
        }
        p.runs.push(Run {
            index,
            sample: cfg.clone(),
            model: model.hash.clone(),
            restored: restored_ref.id.clone(),
            near: model.model.header.near,
            far: model.model.header.far,
            intrinsics: model.intrinsics(),
            variants,
        });
        Ok(index)
    })
}

/// Integrates, triangulates, smooths and exports one variant.
pub fn reconstruct_mesh(
    depth: &DepthMap,
    normals: &NormalMap,
    k: &CameraIntrinsics,
    cfg: &ReconstructConfig,
) -> Result<TriangleMesh> {
    cfg.validate()?;
    let normals = normals.with_valid(depth.valid_mask())?;
    let icfg = IntegrationConfig { lambda: cfg.lambda, ..Default::default() };
    let (refined, _) = integrate_normals(&normals, depth, &icfg, k).map_err(stage_err(Stage::Integrate))?;
    let tau = cfg.tau.unwrap_or_else(|| default_discontinuity(depth));
    let mesh = triangulate_depth_grid(&refined, k, tau);
    if mesh.is_empty() {
        return Err(Error::Stage {
            stage: Stage::Triangulate,
            source: Box::new(Error::Empty("no quad passes the discontinuity test".into())),
        });
    }
    Ok(if cfg.smooth > 0 { smooth_mesh(&mesh, cfg.smooth, cfg.smooth_strength) } else { mesh })
}

pub fn mesh_media(format: MeshFormat) -> (&'static str, &'static str) {
    match format {
        MeshFormat::PlyBinary => ("mesh.ply", MEDIA_PLY),
        MeshFormat::Obj => ("mesh.obj", MEDIA_OBJ),
    }
}

/// Decodes a stored variant's maps.
pub fn decode_variant(depth_png: &[u8], normal_png: &[u8], near: f32, far: f32) -> Result<(DepthMap, NormalMap)> {
    Ok((decode_depth_png16(depth_png, near, far)?, decode_normal_rgb8(normal_png)?))
}

pub fn reconstruct(
    store: &ProjectStore,
    id: &str,
    run: usize,
    k: usize,
    cfg: &ReconstructConfig,
) -> Result<ArtifactRef> {
    cfg.validate()?;
    store.update(id, |p, w| {
        p.require(Stage::Triangulate)?;
        let r = p.run(run)?.clone();
        let v = p.variant(run, k)?.clone();
        let (depth, normals) =
            decode_variant(&w.read(&v.depth)?, &w.read(&v.normal)?, r.near, r.far).map_err(stage_err(Stage::Decode))?;
        let mesh = reconstruct_mesh(&depth, &normals, &r.intrinsics, cfg)?;
        let bytes = export_mesh(&mesh, cfg.format).map_err(stage_err(Stage::Export))?;
        let dir = variant_dir(run, k);
        w.remove(&format!("{dir}/mesh.ply"))?;
        w.remove(&format!("{dir}/mesh.obj"))?;
        let (name, media) = mesh_media(cfg.format);
        let a = w.write(&format!("{dir}/{name}"), media, &bytes)?;
        let slot = &mut p.runs[run].variants[k];
        slot.mesh = Some(a.clone());
        slot.reconstruct = Some(*cfg);
        Ok(a)
    })
}
