//! Wall photograph → clean binary sketch.
//!
//! Pigment isolation, tile-wise contrast equalization, Canny edge detection
//! and small-component removal. All functions are pure and deterministic.

mod canny;
mod clahe;
mod clean;

pub use canny::{extract_edges, gaussian_kernel};
pub use clahe::equalize_contrast;
pub use clean::{clean_sketch, close3x3, connected_components};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::raster::{GrayImage, Mask, RgbImage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PigmentMode {
    /// `R - max(G, B)`, for red underdrawings.
    RedPigment,
    /// Rec. 709 luminance.
    Luminance,
}

impl std::str::FromStr for PigmentMode {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "red" | "red-pigment" => Ok(Self::RedPigment),
            "lum" | "luminance" => Ok(Self::Luminance),
            other => Err(invalid(format!("unknown pigment mode {other:?} (expected red|lum)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PigmentParams {
    pub mode: PigmentMode,
    pub gain: f32,
}

impl Default for PigmentParams {
    fn default() -> Self {
        Self { mode: PigmentMode::RedPigment, gain: 2.0 }
    }
}

impl PigmentParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain > 0.0 && self.gain <= 100.0) {
            return Err(invalid(format!("pigment gain {} outside (0, 100]", self.gain)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeParams {
    /// Gaussian blur standard deviation in pixels.
    pub sigma: f32,
    /// Hysteresis thresholds on the max-normalized gradient magnitude.
    pub t_low: f32,
    pub t_high: f32,
    /// Components smaller than this are dropped by [`clean_sketch`].
    pub min_component: usize,
}

impl Default for EdgeParams {
    fn default() -> Self {
        Self { sigma: 1.4, t_low: 0.1, t_high: 0.25, min_component: 12 }
    }
}

impl EdgeParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..=5.0).contains(&self.sigma) {
            return Err(invalid(format!("sigma {} outside [0.5, 5]", self.sigma)));
        }
        if !(0.0 < self.t_low && self.t_low < self.t_high && self.t_high < 1.0) {
            return Err(invalid(format!(
                "thresholds must satisfy 0 < low < high < 1, got low={} high={}",
                self.t_low, self.t_high
            )));
        }
        if self.min_component < 1 {
            return Err(invalid("min_component must be at least 1"));
        }
        Ok(())
    }
}

pub fn isolate_pigment(img: &RgbImage, p: &PigmentParams) -> Result<GrayImage> {
    p.validate()?;
    let data = img
        .data()
        .chunks_exact(3)
        .map(|px| match p.mode {
            PigmentMode::RedPigment => (p.gain * (px[0] - px[1].max(px[2]))).clamp(0.0, 1.0),
            PigmentMode::Luminance => (0.2126 * px[0] + 0.7152 * px[1] + 0.0722 * px[2]).clamp(0.0, 1.0),
        })
        .collect();
    GrayImage::new(img.width(), img.height(), data)
}

/// Every parameter of the photo-to-sketch chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExtractConfig {
    pub pigment: PigmentParams,
    /// CLAHE tiles per axis.
    pub tiles: usize,
    /// CLAHE clip limit, as a multiple of the mean bin count.
    pub clip: f32,
    pub edges: EdgeParams,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        Self { pigment: PigmentParams::default(), tiles: 8, clip: 2.0, edges: EdgeParams::default() }
    }
}

impl ExtractConfig {
    pub fn validate(&self) -> Result<()> {
        self.pigment.validate()?;
        self.edges.validate()?;
        if self.tiles == 0 || !(self.clip >= 1.0) {
            return Err(invalid("CLAHE needs at least one tile and clip >= 1"));
        }
        Ok(())
    }
}

/// Pigment isolation, contrast equalization, Canny and cleanup.
pub fn extract_sketch(photo: &RgbImage, cfg: &ExtractConfig) -> Result<Mask> {
    cfg.validate()?;
    let pigment = isolate_pigment(photo, &cfg.pigment)?;
    let equalized = equalize_contrast(&pigment, cfg.tiles, cfg.clip)?;
    let edges = extract_edges(&equalized, &cfg.edges)?;
    Ok(clean_sketch(&edges, cfg.edges.min_component))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_pixel(rgb: [f32; 3]) -> RgbImage {
        RgbImage::new(1, 1, rgb.to_vec()).unwrap()
    }

    fn red(gain: f32) -> PigmentParams {
        PigmentParams { mode: PigmentMode::RedPigment, gain }
    }

    #[test]
    fn pigment_examples() {
        let v = |rgb, p| isolate_pigment(&one_pixel(rgb), &p).unwrap().data()[0];
        assert_eq!(v([1.0, 0.0, 0.0], red(1.0)), 1.0);
        assert_eq!(v([0.5, 0.5, 0.5], red(1.0)), 0.0);
        assert_eq!(v([0.5, 0.5, 0.5], red(37.0)), 0.0);
        assert_eq!(v([0.8, 0.3, 0.2], red(2.0)), 1.0);
        let lum = PigmentParams { mode: PigmentMode::Luminance, gain: 1.0 };
        assert!((v([1.0, 1.0, 1.0], lum) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn pigment_gain_bounds() {
        assert!(isolate_pigment(&one_pixel([0.0; 3]), &red(0.0)).is_err());
        assert!(isolate_pigment(&one_pixel([0.0; 3]), &red(100.5)).is_err());
        assert!(isolate_pigment(&one_pixel([0.0; 3]), &red(100.0)).is_ok());
    }

    #[test]
    fn edge_params_validation() {
        assert!(EdgeParams::default().validate().is_ok());
        let bad = EdgeParams { t_low: 0.3, t_high: 0.2, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad_sigma = EdgeParams { sigma: 6.0, ..Default::default() };
        assert!(bad_sigma.validate().is_err());
    }
}
