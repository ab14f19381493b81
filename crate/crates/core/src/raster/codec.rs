//! PNG encodings for every raster type.
//!
//! * depth: 16-bit gray, `code = round(1 + 65534 (d - near) / (far - near))`,
//!   code 0 marks invalid pixels;
//! * normals: 8-bit RGB, `c = round(255 (n_c + 1) / 2)`, exact black marks
//!   invalid pixels;
//! * sketches and masks: 8-bit gray.

use std::io::Cursor;

use super::{face_camera, DepthMap, GrayImage, Mask, NormalMap, RgbImage};
use crate::error::{Error, Result};

const DEPTH_CODE_SPAN: f64 = 65534.0;

fn codec_err(e: impl std::fmt::Display) -> Error {
    Error::Codec(e.to_string())
}

fn encode_png(
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    bytes: &[u8],
) -> Result<Vec<u8>> {
    if width == 0 || height == 0 {
        return Err(Error::Codec("cannot encode an empty image".into()));
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(depth);
        enc.set_compression(png::Compression::Balanced);
        let mut writer = enc.write_header().map_err(codec_err)?;
        writer.write_image_data(bytes).map_err(codec_err)?;
        writer.finish().map_err(codec_err)?;
    }
    Ok(out)
}

struct Decoded {
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    bytes: Vec<u8>,
}

fn decode_png(bytes: &[u8], transformations: png::Transformations) -> Result<Decoded> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(transformations);
    let mut reader = decoder.read_info().map_err(codec_err)?;
    let size = reader.output_buffer_size().ok_or_else(|| Error::Codec("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(codec_err)?;
    buf.truncate(info.buffer_size());
    Ok(Decoded {
        width: info.width as usize,
        height: info.height as usize,
        color: info.color_type,
        depth: info.bit_depth,
        bytes: buf,
    })
}

pub fn encode_depth_png16(d: &DepthMap) -> Result<Vec<u8>> {
    let (near, far) = (d.near() as f64, d.far() as f64);
    let mut bytes = Vec::with_capacity(d.depths().len() * 2);
    for (&z, &ok) in d.depths().iter().zip(d.valid_mask()) {
        let code: u16 = if ok {
            let z = z as f64;
            if !(near..=far).contains(&z) {
                return Err(Error::Codec(format!("depth {z} outside [{near}, {far}]")));
            }
            (1.0 + DEPTH_CODE_SPAN * (z - near) / (far - near)).round() as u16
        } else {
            0
        };
        bytes.extend_from_slice(&code.to_be_bytes());
    }
    encode_png(d.width(), d.height(), png::ColorType::Grayscale, png::BitDepth::Sixteen, &bytes)
}

/// Depth for a code in `1..=65535`.
#[inline]
pub(crate) fn depth_from_code(code: u16, near: f32, far: f32) -> f32 {
    let (near, far) = (near as f64, far as f64);
    let d = near + (code as f64 - 1.0) / DEPTH_CODE_SPAN * (far - near);
    (d as f32).clamp(near as f32, far as f32)
}

pub fn decode_depth_png16(bytes: &[u8], near: f32, far: f32) -> Result<DepthMap> {
    if !(near > 0.0 && near < far) {
        return Err(Error::Codec(format!("invalid depth range [{near}, {far}]")));
    }
    let img = decode_png(bytes, png::Transformations::IDENTITY)?;
    if img.depth != png::BitDepth::Sixteen || img.color != png::ColorType::Grayscale {
        return Err(Error::Codec(format!("depth PNG must be 16-bit grayscale, found {:?} {:?}", img.depth, img.color)));
    }
    let n = img.width * img.height;
    if img.bytes.len() != 2 * n {
        return Err(Error::Codec("truncated depth PNG".into()));
    }
    let mut depth = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for pair in img.bytes.chunks_exact(2) {
        let code = u16::from_be_bytes([pair[0], pair[1]]);
        if code == 0 {
            depth.push(0.0);
            valid.push(false);
        } else {
            depth.push(depth_from_code(code, near, far));
            valid.push(true);
        }
    }
    DepthMap::new(img.width, img.height, depth, valid, near, far)
}

#[inline]
fn quantize_unit(c: f32) -> u8 {
    (255.0 * (c as f64 + 1.0) / 2.0).round().clamp(0.0, 255.0) as u8
}

pub fn encode_normal_rgb8(n: &NormalMap) -> Result<Vec<u8>> {
    let mut bytes = Vec::with_capacity(n.normals().len() * 3);
    for (v, &ok) in n.normals().iter().zip(n.valid_mask()) {
        if ok {
            if v[2] >= 0.0 {
                return Err(Error::Codec(format!("normal {v:?} does not face the camera")));
            }
            bytes.extend(v.iter().map(|&c| quantize_unit(c)));
        } else {
            bytes.extend_from_slice(&[0, 0, 0]);
        }
    }
    encode_png(n.width(), n.height(), png::ColorType::Rgb, png::BitDepth::Eight, &bytes)
}

pub fn decode_normal_rgb8(bytes: &[u8]) -> Result<NormalMap> {
    let img = decode_png(bytes, png::Transformations::IDENTITY)?;
    if img.depth != png::BitDepth::Eight || img.color != png::ColorType::Rgb {
        return Err(Error::Codec(format!("normal PNG must be 8-bit RGB, found {:?} {:?}", img.depth, img.color)));
    }
    let n = img.width * img.height;
    if img.bytes.len() != 3 * n {
        return Err(Error::Codec("truncated normal PNG".into()));
    }
    let mut normals = Vec::with_capacity(n);
    let mut valid = Vec::with_capacity(n);
    for px in img.bytes.chunks_exact(3) {
        if px == [0, 0, 0] {
            normals.push([0.0, 0.0, -1.0]);
            valid.push(false);
        } else {
            let raw = [px[0], px[1], px[2]].map(|c| 2.0 * c as f32 / 255.0 - 1.0);
            normals.push(face_camera(raw, -1e-3));
            valid.push(true);
        }
    }
    NormalMap::new(img.width, img.height, normals, valid)
}

#[inline]
fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// 8-bit gray PNG; values are quantized with `round(255 v)`.
pub fn encode_gray8(img: &GrayImage) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| to_u8(v)).collect();
    encode_png(img.width(), img.height(), png::ColorType::Grayscale, png::BitDepth::Eight, &bytes)
}

/// Decodes any 8-bit PNG as gray; color inputs use Rec. 709 luminance.
pub fn decode_gray8(bytes: &[u8]) -> Result<GrayImage> {
    let rgb = decode_rgb8(bytes)?;
    let data = rgb
        .data()
        .chunks_exact(3)
        .map(|p| {
            if p[0] == p[1] && p[1] == p[2] {
                p[0]
            } else {
                (0.2126 * p[0] + 0.7152 * p[1] + 0.0722 * p[2]).clamp(0.0, 1.0)
            }
        })
        .collect();
    GrayImage::new(rgb.width(), rgb.height(), data)
}

pub fn encode_rgb8(img: &RgbImage) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = img.data().iter().map(|&v| to_u8(v)).collect();
    encode_png(img.width(), img.height(), png::ColorType::Rgb, png::BitDepth::Eight, &bytes)
}

/// Decodes gray, gray-alpha, RGB, RGBA or palette PNGs into RGB; alpha is
/// dropped.
pub fn decode_rgb8(bytes: &[u8]) -> Result<RgbImage> {
    let img = decode_png(bytes, png::Transformations::normalize_to_color8())?;
    let n = img.width * img.height;
    let channels = match img.color {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        other => return Err(Error::Codec(format!("unsupported color type {other:?}"))),
    };
    if img.bytes.len() != channels * n {
        return Err(Error::Codec("truncated PNG".into()));
    }
    let mut data = Vec::with_capacity(3 * n);
    for px in img.bytes.chunks_exact(channels) {
        let rgb = if channels < 3 { [px[0]; 3] } else { [px[0], px[1], px[2]] };
        data.extend(rgb.iter().map(|&c| c as f32 / 255.0));
    }
    RgbImage::new(img.width, img.height, data)
}

/// Mask PNG: 8-bit gray, 255 = hole (`true`).
pub fn encode_mask_png(mask: &Mask) -> Result<Vec<u8>> {
    let bytes: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    encode_png(mask.width(), mask.height(), png::ColorType::Grayscale, png::BitDepth::Eight, &bytes)
}

/// Any pixel at or above half intensity is a hole.
pub fn decode_mask_png(bytes: &[u8]) -> Result<Mask> {
    let gray = decode_gray8(bytes)?;
    Ok(gray.threshold(0.499))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::normalize3;
    use proptest::prelude::*;

    fn codes(bytes: &[u8]) -> Vec<u16> {
        let img = decode_png(bytes, png::Transformations::IDENTITY).unwrap();
        img.bytes.chunks_exact(2).map(|p| u16::from_be_bytes([p[0], p[1]])).collect()
    }

    #[test]
    fn depth_code_endpoints_and_midpoint() {
        let d = DepthMap::new(3, 1, vec![1.0, 3.0, 2.0], vec![true; 3], 1.0, 3.0).unwrap();
        let bytes = encode_depth_png16(&d).unwrap();
        assert_eq!(codes(&bytes), vec![1, 65535, 32768]);
    }

    #[test]
    fn depth_invalid_is_code_zero() {
        let d = DepthMap::new(2, 1, vec![2.0, 0.0], vec![true, false], 1.0, 3.0).unwrap();
        let bytes = encode_depth_png16(&d).unwrap();
        assert_eq!(codes(&bytes)[1], 0);
        let back = decode_depth_png16(&bytes, 1.0, 3.0).unwrap();
        assert_eq!(back.valid_mask(), &[true, false]);
    }

    #[test]
    fn depth_decode_rejects_8bit() {
        let g = GrayImage::filled(4, 4, 0.5);
        let bytes = encode_gray8(&g).unwrap();
        assert!(decode_depth_png16(&bytes, 1.0, 2.0).is_err());
        assert!(decode_depth_png16(b"not a png", 1.0, 2.0).is_err());
        let d = DepthMap::new(1, 1, vec![1.5], vec![true], 1.0, 2.0).unwrap();
        let good = encode_depth_png16(&d).unwrap();
        assert!(decode_depth_png16(&good, 2.0, 1.0).is_err());
    }

    #[test]
    fn normal_facing_camera_encodes_to_128_128_0() {
        let n = NormalMap::new(1, 1, vec![[0.0, 0.0, -1.0]], vec![true]).unwrap();
        let bytes = encode_normal_rgb8(&n).unwrap();
        let img = decode_png(&bytes, png::Transformations::IDENTITY).unwrap();
        assert_eq!(img.bytes, vec![128, 128, 0]);
    }

    #[test]
    fn normal_with_nonnegative_z_is_illegal() {
        assert!(NormalMap::new(1, 1, vec![[1.0, 0.0, 0.0]], vec![true]).is_err());
    }

    #[test]
    fn normal_decode_rejects_garbage() {
        assert!(decode_normal_rgb8(&[0x89, b'P', b'N', b'G']).is_err());
    }

    /// Sweeps every code cell's worst case: encoding maps each unit vector
    /// to the nearest lattice point, so the angular error is bounded by the
    /// half-diagonal of a quantization cell. The sweep walks a dense grid of
    /// directions with `n_z < -0.05`.
    #[test]
    fn normal_quantization_sweep_below_0_6_degrees() {
        let mut worst = 0.0f64;
        let steps = 400;
        for i in 0..=steps {
            for j in 0..=steps {
                let x = -1.0 + 2.0 * i as f64 / steps as f64;
                let y = -1.0 + 2.0 * j as f64 / steps as f64;
                let rem = 1.0 - x * x - y * y;
                if rem <= 0.05f64 * 0.05 {
                    continue;
                }
                let n = normalize3([x as f32, y as f32, -rem.sqrt() as f32]);
                let map = NormalMap::new(1, 1, vec![n], vec![true]).unwrap();
                let back = decode_normal_rgb8(&encode_normal_rgb8(&map).unwrap()).unwrap();
                let m = back.normals()[0];
                let dot = (n[0] * m[0] + n[1] * m[1] + n[2] * m[2]) as f64;
                worst = worst.max(dot.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        assert!(worst < 0.6, "worst angular error {worst}°");
    }

    #[test]
    fn gray_and_mask_round_trip() {
        let m = Mask::new(3, 1, vec![true, false, true]).unwrap();
        assert_eq!(decode_mask_png(&encode_mask_png(&m).unwrap()).unwrap(), m);
        let g = GrayImage::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert_eq!(decode_gray8(&encode_gray8(&g).unwrap()).unwrap(), g);
    }

    proptest! {
        #[test]
        fn depth_round_trip_within_one_step(
            vals in proptest::collection::vec(0.0f32..=1.0, 1..64),
            mask in proptest::collection::vec(any::<bool>(), 64),
            near in 0.1f32..5.0,
            span in 0.01f32..20.0,
        ) {
            let far = near + span;
            let w = vals.len();
            let depth: Vec<f32> = vals.iter().map(|v| near + v * span).collect();
            let valid = mask[..w].to_vec();
            let d = DepthMap::new(w, 1, depth.clone(), valid.clone(), near, far).unwrap();
            let back = decode_depth_png16(&encode_depth_png16(&d).unwrap(), near, far).unwrap();
            prop_assert_eq!(back.valid_mask(), &valid[..]);
            let step = (far - near) as f64 / 65534.0;
            for i in 0..w {
                if valid[i] {
                    let err = (back.depths()[i] as f64 - depth[i] as f64).abs();
                    prop_assert!(err <= step * 1.0001 + 1e-6 * far as f64, "err {} step {}", err, step);
                    prop_assert!(back.depths()[i].is_finite());
                }
            }
        }

        #[test]
        fn normal_round_trip_within_0_6_degrees(x in -1.0f32..1.0, y in -1.0f32..1.0, z in 0.05f32..1.0) {
            let n = normalize3([x, y, -z]);
            prop_assume!(n[2] < -0.05);
            let map = NormalMap::new(1, 1, vec![n], vec![true]).unwrap();
            let back = decode_normal_rgb8(&encode_normal_rgb8(&map).unwrap()).unwrap();
            let m = back.normals()[0];
            let dot = (n[0] * m[0] + n[1] * m[1] + n[2] * m[2]) as f64;
            prop_assert!(dot.clamp(-1.0, 1.0).acos().to_degrees() < 0.6);
        }
    }
}
