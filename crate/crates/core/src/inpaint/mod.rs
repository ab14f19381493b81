//! Hole filling for sketches: training-mask sampling, fast-marching fill and
//! an optional learned kernel refinement.
//!
//! Inpainting works on grayscale values in `[0, 1]`; callers threshold at
//! 0.5 when a binary sketch is needed.

mod fmm;
mod kernel;
mod mask;

pub use fmm::{inpaint_fast_marching, inpaint_fast_marching_traced, FillEvent};
pub use kernel::{train_kernel_model, KernelModel, KernelSample, KernelTrainReport, KERNEL_MAGIC};
pub use mask::{sample_training_mask, sample_training_mask_for, MaskDistribution, MaskKind};
