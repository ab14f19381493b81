//! Model file: `"SFRG"`, `u32` format version, `u32` header length, a JSON
//! header, then the parameters as little-endian `f32` in layout order. All
//! integers are little-endian.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::DenoiserNet;
use super::sample::{sample, SampleConfig};
use super::schedule::NoiseSchedule;
use super::{check_resolution, TAG_VOCABULARY};
use crate::error::{Error, Result};
use crate::synth::CameraIntrinsics;
use crate::tensor::Tensor;

pub const MAGIC: [u8; 4] = *b"SFRG";
pub const FORMAT_VERSION: u32 = 1;
pub const ARCHITECTURE: &str = "forge-denoiser-unet2";
const MAX_HEADER: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainingInfo {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub p_uncond: f64,
    pub seed: u64,
    pub samples: usize,
    pub final_loss: Option<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub architecture: String,
    pub resolution: usize,
    pub vocabulary: usize,
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    /// Depth range the state's depth channel is normalized against.
    pub near: f32,
    pub far: f32,
    /// Camera of the training renders, when known.
    pub intrinsics: Option<CameraIntrinsics>,
    pub parameter_count: usize,
    pub training: TrainingInfo,
}

/// A network together with the schedule and metadata it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub header: ModelHeader,
    pub net: DenoiserNet<f32>,
    pub schedule: NoiseSchedule,
}

impl Model {
    pub fn new(
        net: DenoiserNet<f32>,
        schedule: NoiseSchedule,
        resolution: usize,
        near: f32,
        far: f32,
        intrinsics: Option<CameraIntrinsics>,
        training: TrainingInfo,
    ) -> Result<Self> {
        check_resolution(resolution)?;
        let header = ModelHeader {
            architecture: ARCHITECTURE.into(),
            resolution,
            vocabulary: TAG_VOCABULARY.len(),
            steps: schedule.steps(),
            beta_start: schedule.beta_start(),
            beta_end: schedule.beta_end(),
            near,
            far,
            intrinsics,
            parameter_count: net.param_count(),
            training,
        };
        Ok(Self { header, net, schedule })
    }

    /// Samples at the model's resolution; other sketch sizes are rejected.
    pub fn sample(
        &self,
        sketch: &Tensor,
        cfg: &SampleConfig,
        progress: impl FnMut(usize, usize),
    ) -> Result<Vec<Tensor>> {
        let shape = sketch.shape();
        let actual = shape.last().copied().unwrap_or(0);
        if shape.len() != 3 || shape[1] != self.header.resolution || actual != self.header.resolution {
            return Err(Error::ResolutionMismatch { expected: self.header.resolution, actual });
        }
        sample(&self.net, sketch, cfg, &self.schedule, progress)
    }
}

pub fn write_model(model: &Model) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&model.header)?;
    let params = model.net.params();
    let mut out = Vec::with_capacity(12 + header.len() + 4 * params.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    Ok(out)
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::ModelFormat(msg.into())
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32> {
    let b = bytes.get(at..at + 4).ok_or_else(|| format_err("file truncated in preamble"))?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

pub fn read_model(bytes: &[u8]) -> Result<Model> {
    if bytes.get(..4) != Some(&MAGIC[..]) {
        return Err(format_err("bad magic, not a model file"));
    }
    let version = read_u32(bytes, 4)?;
    if version != FORMAT_VERSION {
        return Err(format_err(format!("unsupported format version {version}")));
    }
    let hlen = read_u32(bytes, 8)? as usize;
    if hlen > MAX_HEADER {
        return Err(format_err("header length implausible"));
    }
    let hbytes = bytes.get(12..12 + hlen).ok_or_else(|| format_err("file truncated in header"))?;
    let header: ModelHeader = serde_json::from_slice(hbytes).map_err(|e| format_err(format!("header: {e}")))?;
    if header.architecture != ARCHITECTURE {
        return Err(format_err(format!("unknown architecture {:?}", header.architecture)));
    }
    if header.vocabulary != TAG_VOCABULARY.len() {
        return Err(format_err(format!("vocabulary size {} unsupported", header.vocabulary)));
    }
    check_resolution(header.resolution).map_err(|e| format_err(e.to_string()))?;
    if !(header.near > 0.0 && header.near < header.far) {
        return Err(format_err("header depth range invalid"));
    }
    let body = &bytes[12 + hlen..];
    if body.len() != 4 * header.parameter_count {
        return Err(format_err(format!(
            "expected {} parameter bytes, found {}",
            4 * header.parameter_count,
            body.len()
        )));
    }
    let params: Vec<f32> = body.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    let net = DenoiserNet::from_params(params)?;
    let schedule = NoiseSchedule::linear(header.steps, header.beta_start, header.beta_end)
        .map_err(|e| format_err(e.to_string()))?;
    Ok(Model { header, net, schedule })
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, write_model(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    read_model(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> Model {
        let mut net = DenoiserNet::<f32>::init(4);
        net.params_mut()[7] = f32::from_bits(0x3f80_0001);
        Model::new(net, NoiseSchedule::default(), 32, 1.0, 6.0, None, TrainingInfo::default()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let m = model();
        let bytes = write_model(&m).unwrap();
        let back = read_model(&bytes).unwrap();
        let a: Vec<u32> = m.net.params().iter().map(|p| p.to_bits()).collect();
        let b: Vec<u32> = back.net.params().iter().map(|p| p.to_bits()).collect();
        assert_eq!(a, b);
        assert_eq!(back.header, m.header);
        assert_eq!(back.schedule, m.schedule);
    }

    #[test]
    fn truncation_is_rejected_everywhere() {
        let bytes = write_model(&model()).unwrap();
        for cut in [0, 3, 5, 11, 20, bytes.len() - 1, bytes.len() - 4] {
            assert!(read_model(&bytes[..cut]).is_err(), "cut at {cut}");
        }
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(read_model(&extra).is_err());
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = write_model(&model()).unwrap();
        bytes[0] = b'X';
        assert!(read_model(&bytes).is_err());
        let mut bytes = write_model(&model()).unwrap();
        bytes[4] = 2;
        assert!(read_model(&bytes).is_err());
    }

    #[test]
    fn preamble_layout() {
        let bytes = write_model(&model()).unwrap();
        assert_eq!(&bytes[..4], b"SFRG");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&bytes[12..12 + hlen]).unwrap();
        assert_eq!(header["resolution"], 32);
        assert_eq!(header["steps"], 200);
        let n = header["parameter_count"].as_u64().unwrap() as usize;
        assert_eq!(bytes.len(), 12 + hlen + 4 * n);
        // first parameter is conv1's first weight
        let first = f32::from_le_bytes(bytes[12 + hlen..16 + hlen].try_into().unwrap());
        assert_eq!(first, model().net.params()[0]);
    }

    #[test]
    fn resolution_mismatch_on_sample() {
        let m = model();
        let err = m.sample(&Tensor::zeros(&[1, 64, 64]), &SampleConfig::default(), |_, _| {}).unwrap_err();
        assert!(matches!(err, Error::ResolutionMismatch { expected: 32, actual: 64 }));
    }
}
