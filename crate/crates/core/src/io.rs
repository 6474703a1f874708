//! Image decoding, map/mask export, raw float dumps, and small text tables.
//!
//! Raw dumps are the oracle interchange format: an 8-byte header of two
//! little-endian u32 (width, height) followed by row-major little-endian f32
//! values. Images are presentation only.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::{DynamicImage, ImageBuffer, ImageReader, Luma};
use sha2::{Digest, Sha256};

use crate::error::{Result, SunnError};
use crate::field::{Mask, ScalarField, SignalField};
use crate::grid::GridDims;
use crate::leaky::TracePoint;
use crate::topology::RandomTopology;

/// Luminance weights for RGB-to-gray conversion.
const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// Decodes a PNG or portable graymap/pixmap into normalized signals.
/// `channels` is 1 (grayscale, luminance-converted if needed) or 3 (RGB).
pub fn load_image(path: &Path, channels: usize) -> Result<SignalField> {
    if channels != 1 && channels != 3 {
        return Err(SunnError::InvalidConfig(format!(
            "channels must be 1 or 3, got {channels}"
        )));
    }
    let reader = ImageReader::open(path)
        .map_err(|e| SunnError::io(path, e))?
        .with_guessed_format()
        .map_err(|e| SunnError::io(path, e))?;
    let img = reader
        .decode()
        .map_err(|e| SunnError::decode(path, e.to_string()))?;
    let dims = GridDims::new(img.width(), img.height())?;

    let values = match channels {
        1 => match img {
            DynamicImage::ImageLuma8(buf) => buf.pixels().map(|p| p.0[0] as f64 / 255.0).collect(),
            DynamicImage::ImageLuma16(buf) => {
                buf.pixels().map(|p| p.0[0] as f64 / 65535.0).collect()
            }
            other => {
                let rgb = other.to_rgb8();
                rgb.pixels()
                    .map(|p| {
                        (LUMA[0] * p.0[0] as f64
                            + LUMA[1] * p.0[1] as f64
                            + LUMA[2] * p.0[2] as f64)
                            / 255.0
                    })
                    .collect()
            }
        },
        _ => {
            let rgb = img.to_rgb8();
            let mut v = Vec::with_capacity(dims.len() * 3);
            for p in rgb.pixels() {
                v.push(p.0[0] as f64 / 255.0);
                v.push(p.0[1] as f64 / 255.0);
                v.push(p.0[2] as f64 / 255.0);
            }
            v
        }
    };
    SignalField::new(dims, channels, values)
}

/// Output bit depth for grayscale map images.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrayDepth {
    Eight,
    Sixteen,
}

/// Writes a min-max normalized grayscale image. A constant field comes out
/// all zero.
pub fn save_gray_image(field: &ScalarField, path: &Path, depth: GrayDepth) -> Result<()> {
    let dims = field.dims();
    let normalized = field.normalized();
    match depth {
        GrayDepth::Eight => {
            let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
                ImageBuffer::from_fn(dims.width, dims.height, |x, y| {
                    Luma([(normalized.get(x, y) * 255.0).round() as u8])
                });
            buf.save(path)
                .map_err(|e| SunnError::decode(path, e.to_string()))
        }
        GrayDepth::Sixteen => {
            let buf: ImageBuffer<Luma<u16>, Vec<u16>> =
                ImageBuffer::from_fn(dims.width, dims.height, |x, y| {
                    Luma([(normalized.get(x, y) * 65535.0).round() as u16])
                });
            buf.save(path)
                .map_err(|e| SunnError::decode(path, e.to_string()))
        }
    }
}

/// Writes the raw dump: `width: u32le, height: u32le, values: f32le`.
pub fn save_raw(field: &ScalarField, path: &Path) -> Result<()> {
    let dims = field.dims();
    let mut bytes = Vec::with_capacity(8 + field.values().len() * 4);
    bytes.extend_from_slice(&dims.width.to_le_bytes());
    bytes.extend_from_slice(&dims.height.to_le_bytes());
    for &v in field.values() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| SunnError::io(path, e))
}

/// Reads a raw dump back into a field.
pub fn load_raw(path: &Path) -> Result<ScalarField> {
    let bytes = fs::read(path).map_err(|e| SunnError::io(path, e))?;
    if bytes.len() < 8 {
        return Err(SunnError::decode(path, "raw dump shorter than its header"));
    }
    let width = u32::from_le_bytes(bytes[0..4].try_into().unwrap());
    let height = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let dims = GridDims::new(width, height)
        .map_err(|_| SunnError::decode(path, format!("bad dims {width}x{height}")))?;
    let expected = 8 + dims.len() * 4;
    if bytes.len() != expected {
        return Err(SunnError::decode(
            path,
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    let values = bytes[8..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    ScalarField::new(dims, values)
}

/// Writes a mask: `.pbm` gets a 1-bit portable bitmap, anything else a
/// 0/255 grayscale image.
pub fn save_mask(mask: &Mask, path: &Path) -> Result<()> {
    let dims = mask.dims();
    if path.extension().and_then(|e| e.to_str()) == Some("pbm") {
        let mut bytes = format!("P4\n{} {}\n", dims.width, dims.height).into_bytes();
        for y in 0..dims.height {
            let mut byte = 0u8;
            let mut filled = 0;
            for x in 0..dims.width {
                byte = (byte << 1) | mask.get(x, y) as u8;
                filled += 1;
                if filled == 8 {
                    bytes.push(byte);
                    byte = 0;
                    filled = 0;
                }
            }
            if filled > 0 {
                bytes.push(byte << (8 - filled));
            }
        }
        return fs::write(path, bytes).map_err(|e| SunnError::io(path, e));
    }
    let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
        ImageBuffer::from_fn(dims.width, dims.height, |x, y| {
            Luma([if mask.get(x, y) { 255 } else { 0 }])
        });
    buf.save(path)
        .map_err(|e| SunnError::decode(path, e.to_string()))
}

/// Loads a 0/255-style mask image; any nonzero pixel is true.
pub fn load_mask(path: &Path) -> Result<Mask> {
    let signals = load_image(path, 1)?;
    let values = signals.values().iter().map(|&v| v > 0.0).collect();
    Mask::new(signals.dims(), values)
}

/// Two-column text table of the iteration trace: `iteration total`.
pub fn write_trace(trace: &[TracePoint], path: &Path) -> Result<()> {
    let mut out = String::from("iteration total\n");
    for p in trace {
        out.push_str(&format!("{} {}\n", p.iteration, p.total));
    }
    fs::write(path, out).map_err(|e| SunnError::io(path, e))
}

/// Line-oriented topology dump plus a small sidecar manifest.
pub fn write_topology_dump(topology: &RandomTopology, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    topology
        .write_dump(&mut buf)
        .map_err(|e| SunnError::io(path, e))?;
    fs::write(path, buf).map_err(|e| SunnError::io(path, e))?;

    let cfg = topology.config();
    let sidecar = path.with_extension("manifest.toml");
    let mut out = String::new();
    out.push_str(&format!("width = {}\n", topology.dims().width));
    out.push_str(&format!("height = {}\n", topology.dims().height));
    out.push_str(&format!("radius = {}\n", cfg.radius));
    out.push_str(&format!("degree = {}\n", cfg.connections_per_neuron));
    out.push_str(&format!("seed = {}\n", cfg.seed));
    out.push_str(&format!("border_policy = \"{}\"\n", cfg.border_policy));
    out.push_str(&format!(
        "duplicate_links = {}\n",
        topology.duplicate_links()
    ));
    fs::write(&sidecar, out).map_err(|e| SunnError::io(sidecar, e))
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| SunnError::io(path, e))?;
    Ok(sha256_bytes(&bytes))
}

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Creates the parent directory of a path if needed.
pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| SunnError::io(parent, e))?;
        }
    }
    Ok(())
}

/// Writes a PR curve as CSV.
pub fn write_pr_curve(curve: &crate::eval::PrCurve, path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    curve
        .write_csv(&mut buf)
        .map_err(|e| SunnError::io(path, e))?;
    let mut f = fs::File::create(path).map_err(|e| SunnError::io(path, e))?;
    f.write_all(&buf).map_err(|e| SunnError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn pgm_values_normalize_to_unit_range() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("g.pgm");
        // Plain (P2) graymap, 2x2, values 0 85 170 255.
        fs::write(&path, "P2\n2 2\n255\n0 85 170 255\n").unwrap();
        let s = load_image(&path, 1).unwrap();
        let expect = [0.0, 85.0 / 255.0, 170.0 / 255.0, 1.0];
        for (a, b) in s.values().iter().zip(expect) {
            assert!((a - b).abs() < 1.0 / 255.0);
        }
    }

    #[test]
    fn zero_byte_file_is_a_decode_error() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("empty.png");
        fs::write(&path, b"").unwrap();
        assert!(matches!(
            load_image(&path, 1),
            Err(SunnError::Decode { .. })
        ));
    }

    #[test]
    fn pure_red_png_converts_by_luminance() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("red.png");
        let buf: ImageBuffer<image::Rgb<u8>, Vec<u8>> =
            ImageBuffer::from_pixel(3, 2, image::Rgb([255, 0, 0]));
        buf.save(&path).unwrap();
        let s = load_image(&path, 1).unwrap();
        for &v in s.values() {
            assert!((v - 0.299).abs() < 1.0 / 255.0);
        }
    }

    #[test]
    fn raw_dump_roundtrips_f32_exactly() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("field.raw");
        let dims = GridDims::new(3, 2).unwrap();
        // Values chosen representable in f32.
        let field = ScalarField::new(dims, vec![0.5, 0.25, 1.0, 0.0, 0.125, 0.75]).unwrap();
        save_raw(&field, &path).unwrap();
        let back = load_raw(&path).unwrap();
        assert_eq!(back.values(), field.values());
        assert_eq!(back.dims(), dims);
        // Byte-level identity on a second save.
        let again = dir.path().join("field2.raw");
        save_raw(&back, &again).unwrap();
        assert_eq!(fs::read(&path).unwrap(), fs::read(&again).unwrap());
    }

    #[test]
    fn truncated_raw_dump_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bad.raw");
        fs::write(&path, [1, 0, 0, 0, 1, 0, 0, 0, 9]).unwrap();
        assert!(matches!(load_raw(&path), Err(SunnError::Decode { .. })));
    }

    #[test]
    fn constant_field_saves_as_all_zero_image() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("const.png");
        let field = ScalarField::filled(GridDims::new(4, 4).unwrap(), 0.7);
        save_gray_image(&field, &path, GrayDepth::Eight).unwrap();
        let back = load_image(&path, 1).unwrap();
        assert!(back.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_pixel_mask_saves_one_bright_pixel() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("mask.png");
        let dims = GridDims::new(3, 3).unwrap();
        let mut values = vec![false; 9];
        values[4] = true;
        let mask = Mask::new(dims, values).unwrap();
        save_mask(&mask, &path).unwrap();
        let back = load_mask(&path).unwrap();
        assert_eq!(back.count_true(), 1);
        assert!(back.get(1, 1));
    }

    #[test]
    fn pbm_mask_is_bit_packed() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("mask.pbm");
        let dims = GridDims::new(9, 1).unwrap();
        let mut values = vec![false; 9];
        values[0] = true;
        values[8] = true;
        let mask = Mask::new(dims, values).unwrap();
        save_mask(&mask, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        let header = b"P4\n9 1\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0b1000_0000, 0b1000_0000]);
    }
}
