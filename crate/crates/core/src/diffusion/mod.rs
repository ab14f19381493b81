//! Conditional denoising diffusion over joint depth and normal states.
//!
//! A state is a `[4, R, R]` tensor (normalized depth, then the three normal
//! components) conditioned on a `[1, R, R]` sketch and a tag id. Tag 0 with
//! an all-zero sketch is the unconditional branch used by guidance.

mod io;
mod net;
mod sample;
mod schedule;
mod state;
mod train;

pub use io::{
    load_model, read_model, save_model, write_model, Model, ModelHeader, TrainingInfo, ARCHITECTURE, FORMAT_VERSION,
    MAGIC,
};
pub use net::{
    timestep_embedding, DenoiserInput, DenoiserLayout, DenoiserNet, ForwardCache, EMBED_DIM, STATE_CHANNELS,
};
pub use sample::{guided_noise, sample, SampleConfig};
pub use schedule::{forward_diffuse, NoiseSchedule};
pub use state::{decode_state, encode_state, TrainingSample};
pub use train::{batch_loss_and_grad, train, train_step, Batch, TrainConfig, TrainStepOutcome, Trainer};

/// Conditioning tags; the index is the tag id and 0 is the null condition.
pub const TAG_VOCABULARY: [&str; 7] =
    ["null", "statue", "robed figure", "raised arm", "seated figure", "bust", "on pedestal"];

pub const NULL_TAG: usize = 0;

pub fn tag_name(tag: usize) -> Option<&'static str> {
    TAG_VOCABULARY.get(tag).copied()
}

/// Model resolutions must be powers of two no smaller than 16.
pub fn check_resolution(r: usize) -> crate::Result<()> {
    if r < 16 || !r.is_power_of_two() {
        return Err(crate::error::invalid(format!("resolution {r} must be a power of two >= 16")));
    }
    Ok(())
}
