//! Training both learned models from a synthetic dataset directory.

use std::path::Path;

use crate::diffusion::{Model, NoiseSchedule, TrainConfig, TrainingInfo, TrainingSample};
use crate::error::{invalid, Result};
use crate::inpaint::{sample_training_mask_for, train_kernel_model, KernelModel, KernelSample, MaskDistribution};
use crate::rng::sub_seed;
use crate::synth::{load_dataset, LoadedSample, Split};

fn train_split(dir: &Path) -> Result<(crate::synth::DatasetManifest, Vec<LoadedSample>)> {
    let (manifest, samples) = load_dataset(dir)?;
    let train: Vec<LoadedSample> = samples.into_iter().filter(|s| s.split == Split::Train).collect();
    if train.is_empty() {
        return Err(crate::Error::Empty(format!("dataset {} has no training samples", dir.display())));
    }
    Ok((manifest, train))
}

/// Trains the denoiser on the training split of the dataset in `dir`.
/// `cfg.resolution` must equal the dataset's. Returns the model and the
/// per-step losses.
pub fn train_from_dataset(
    dir: &Path,
    cfg: &TrainConfig,
    schedule: &NoiseSchedule,
    progress: impl FnMut(usize, f32),
) -> Result<(Model, Vec<f32>)> {
    let (manifest, train) = train_split(dir)?;
    if manifest.resolution != cfg.resolution {
        return Err(invalid(format!(
            "dataset resolution {} differs from the training resolution {}",
            manifest.resolution, cfg.resolution
        )));
    }
    let samples = train.iter().map(LoadedSample::to_training).collect::<Result<Vec<TrainingSample>>>()?;
    let (net, losses) = crate::diffusion::train(&samples, cfg, schedule, progress)?;
    let info = TrainingInfo {
        steps: cfg.steps,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        p_uncond: cfg.p_uncond,
        seed: cfg.seed,
        samples: samples.len(),
        final_loss: losses.last().copied(),
    };
    let model = Model::new(
        net,
        schedule.clone(),
        manifest.resolution,
        manifest.near,
        manifest.far,
        Some(manifest.intrinsics),
        info,
    )?;
    Ok((model, losses))
}

/// Trains the kernel refinement model on the dataset's training sketches,
/// corrupting sample `i` with a mask drawn from sub-seed `i` of `cfg.seed`.
pub fn train_kernel_from_dataset(
    dir: &Path,
    cfg: &TrainConfig,
    masks: &MaskDistribution,
    radius: usize,
) -> Result<(KernelModel, Vec<f32>)> {
    let (_, train) = train_split(dir)?;
    let samples = train
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let lines = s.sketch.threshold(0.5);
            let holes = sample_training_mask_for(sub_seed(cfg.seed, i as u64), masks, &lines)?;
            KernelSample::new(s.sketch.clone(), holes, radius)
        })
        .collect::<Result<Vec<_>>>()?;
    let (model, report) = train_kernel_model(&samples, cfg)?;
    Ok((model, report.losses))
}
