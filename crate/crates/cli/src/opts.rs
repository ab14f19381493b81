//! Stage options shared by the command line and the HTTP request bodies,
//! so both layers resolve and validate parameters identically.

use clap::Args;
use serde::{Deserialize, Deserializer};

use forge_core::geom::MeshFormat;
use forge_core::pipeline::{InpaintConfig, ReconstructConfig};
use forge_core::sketch::{ExtractConfig, PigmentMode};
use forge_core::Result;

fn parse_mode(s: &str) -> std::result::Result<PigmentMode, String> {
    s.parse().map_err(|e: forge_core::Error| e.to_string())
}

fn de_mode<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<PigmentMode>, D::Error> {
    Option::<String>::deserialize(d)?.map(|s| parse_mode(&s).map_err(serde::de::Error::custom)).transpose()
}

fn parse_format(s: &str) -> std::result::Result<MeshFormat, String> {
    match s {
        "ply" | "ply-binary" => Ok(MeshFormat::PlyBinary),
        "obj" => Ok(MeshFormat::Obj),
        other => Err(format!("unknown mesh format {other:?} (expected ply|obj)")),
    }
}

fn de_format<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<MeshFormat>, D::Error> {
    Option::<String>::deserialize(d)?.map(|s| parse_format(&s).map_err(serde::de::Error::custom)).transpose()
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractOpts {
    /// Gaussian blur sigma of the edge detector, pixels.
    #[arg(long)]
    pub sigma: Option<f32>,
    /// Weak hysteresis threshold, relative to the maximum gradient.
    #[arg(long)]
    pub low: Option<f32>,
    /// Strong hysteresis threshold, relative to the maximum gradient.
    #[arg(long)]
    pub high: Option<f32>,
    /// Smallest 8-connected component kept, pixels.
    #[arg(long)]
    pub min_cc: Option<usize>,
    /// Pigment channel: red or lum.
    #[arg(long, value_parser = parse_mode)]
    #[serde(default, deserialize_with = "de_mode")]
    pub mode: Option<PigmentMode>,
    /// Weight of the pigment response.
    #[arg(long)]
    pub gain: Option<f32>,
    /// Contrast-equalization tiles per side.
    #[arg(long)]
    pub tiles: Option<usize>,
    /// Contrast-equalization clip limit.
    #[arg(long)]
    pub clip: Option<f32>,
}

impl ExtractOpts {
    pub fn resolve(&self) -> Result<ExtractConfig> {
        let mut c = ExtractConfig::default();
        if let Some(v) = self.sigma {
            c.edges.sigma = v;
        }
        if let Some(v) = self.low {
            c.edges.t_low = v;
        }
        if let Some(v) = self.high {
            c.edges.t_high = v;
        }
        if let Some(v) = self.min_cc {
            c.edges.min_component = v;
        }
        if let Some(v) = self.mode {
            c.pigment.mode = v;
        }
        if let Some(v) = self.gain {
            c.pigment.gain = v;
        }
        if let Some(v) = self.tiles {
            c.tiles = v;
        }
        if let Some(v) = self.clip {
            c.clip = v;
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InpaintOpts {
    /// Fast-marching neighborhood radius, pixels.
    #[arg(long)]
    pub radius: Option<usize>,
}

impl InpaintOpts {
    pub fn resolve(&self) -> Result<InpaintConfig> {
        let c = InpaintConfig { radius: self.radius.unwrap_or(InpaintConfig::default().radius) };
        if c.radius < 1 {
            return Err(forge_core::Error::InvalidArgument("radius must be >= 1".into()));
        }
        Ok(c)
    }
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReconstructOpts {
    /// Data weight of the normal integration.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Depth discontinuity threshold, meters (default: 2% of the depth range).
    #[arg(long)]
    pub tau: Option<f32>,
    /// Laplacian smoothing iterations.
    #[arg(long)]
    pub smooth: Option<usize>,
    /// Laplacian smoothing step in (0, 1).
    #[arg(long)]
    pub smooth_strength: Option<f32>,
    /// Mesh format: ply or obj.
    #[arg(long, value_parser = parse_format)]
    #[serde(default, deserialize_with = "de_format")]
    pub format: Option<MeshFormat>,
}

impl ReconstructOpts {
    pub fn resolve(&self) -> Result<ReconstructConfig> {
        let d = ReconstructConfig::default();
        let c = ReconstructConfig {
            lambda: self.lambda.unwrap_or(d.lambda),
            tau: self.tau.or(d.tau),
            smooth: self.smooth.unwrap_or(d.smooth),
            smooth_strength: self.smooth_strength.unwrap_or(d.smooth_strength),
            format: self.format.unwrap_or(d.format),
        };
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_options_resolve_to_defaults() {
        assert_eq!(ExtractOpts::default().resolve().unwrap(), ExtractConfig::default());
        assert_eq!(InpaintOpts::default().resolve().unwrap(), InpaintConfig::default());
        assert_eq!(ReconstructOpts::default().resolve().unwrap(), ReconstructConfig::default());
    }

    #[test]
    fn json_bodies_use_flag_names() {
        let e: ExtractOpts = serde_json::from_str(r#"{"sigma": 2.0, "min_cc": 5, "mode": "lum"}"#).unwrap();
        let c = e.resolve().unwrap();
        assert_eq!((c.edges.sigma, c.edges.min_component, c.pigment.mode), (2.0, 5, PigmentMode::Luminance));
        assert!(serde_json::from_str::<ExtractOpts>(r#"{"mode": "blue"}"#).is_err());
        assert!(serde_json::from_str::<ExtractOpts>(r#"{"sigmaa": 1}"#).is_err());
        let r: ReconstructOpts = serde_json::from_str(r#"{"format": "obj", "smooth": 2}"#).unwrap();
        assert_eq!(r.resolve().unwrap().format, MeshFormat::Obj);
    }

    #[test]
    fn out_of_range_values_fail_resolution() {
        assert!(InpaintOpts { radius: Some(0) }.resolve().is_err());
        assert!(ReconstructOpts { lambda: Some(0.0), ..Default::default() }.resolve().is_err());
        assert!(ExtractOpts { low: Some(0.5), high: Some(0.2), ..Default::default() }.resolve().is_err());
    }
}
