//! Reading targets and writing holograms, previews and metric tables.
//!
//! The `.holophs` phase format is the format of record:
//!
//! ```text
//! offset 0   8 bytes   magic "HOLOPHS1"
//! offset 8   u32 LE    height
//! offset 12  u32 LE    width
//! offset 16  f64 LE    height*width phases, row-major
//! ```
//!
//! PNG output is 8-bit grayscale and only meant for viewing.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageReader, Luma};

use crate::error::{Error, Result};
use crate::field::{canonical_phase, AmplitudeImage, PhaseMask};

pub const PHASE_MAGIC: &[u8; 8] = b"HOLOPHS1";
const HEADER_LEN: usize = 16;

fn image_err(path: &Path, source: image::ImageError) -> Error {
    match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        other => Error::Image {
            path: path.to_path_buf(),
            source: other,
        },
    }
}

/// Loads an 8-bit grayscale or RGB PNG/PGM as a `[0, 1]` amplitude image.
///
/// Colour is reduced with `0.299R + 0.587G + 0.114B`. With `out_dims` the
/// image is area-averaged to `(height, width)`.
pub fn load_target(path: &Path, out_dims: Option<(usize, usize)>) -> Result<AmplitudeImage> {
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let img = reader.decode().map_err(|e| image_err(path, e))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::InvalidInput(format!(
            "{}: empty image",
            path.display()
        )));
    }
    let luma: Vec<f64> = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw().into_iter().map(f64::from).collect(),
        DynamicImage::ImageLumaA8(g) => g.pixels().map(|p| f64::from(p.0[0])).collect(),
        other => other
            .to_rgb8()
            .pixels()
            .map(|p| {
                let [r, g, b] = p.0.map(f64::from);
                0.299 * r + 0.587 * g + 0.114 * b
            })
            .collect(),
    };
    let (oh, ow) = out_dims.unwrap_or((h, w));
    if oh == 0 || ow == 0 {
        return Err(Error::InvalidInput(format!(
            "output size {oh}x{ow} is degenerate"
        )));
    }
    let resized = if (oh, ow) == (h, w) {
        luma
    } else {
        area_resample(&luma, (h, w), (oh, ow))
    };
    let values = resized
        .into_iter()
        .map(|v| (v / 255.0).clamp(0.0, 1.0))
        .collect();
    AmplitudeImage::new(oh, ow, values)
}

/// For each output cell along one axis, the input indices it overlaps and
/// their weights (overlap length over cell length).
fn area_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let ratio = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|k| {
            let lo = k as f64 * ratio;
            let hi = (k + 1) as f64 * ratio;
            let first = lo.floor() as usize;
            let last = (hi.ceil() as usize).min(n_in);
            (first..last)
                .filter_map(|j| {
                    let overlap = hi.min((j + 1) as f64) - lo.max(j as f64);
                    (overlap > 0.0).then_some((j, overlap / ratio))
                })
                .collect()
        })
        .collect()
}

/// Box-filter resampling where each output pixel is the area-weighted mean
/// of the input pixels under it.
pub fn area_resample(data: &[f64], from: (usize, usize), to: (usize, usize)) -> Vec<f64> {
    let (h, w) = from;
    let (oh, ow) = to;
    let wx = area_weights(w, ow);
    let wy = area_weights(h, oh);
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for (c, taps) in wx.iter().enumerate() {
            rows[r * ow + c] = taps.iter().map(|&(j, wt)| wt * data[r * w + j]).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for (r, taps) in wy.iter().enumerate() {
        for c in 0..ow {
            out[r * ow + c] = taps.iter().map(|&(j, wt)| wt * rows[j * ow + c]).sum();
        }
    }
    out
}

pub fn encode_phase(phase: &PhaseMask) -> Vec<u8> {
    let (h, w) = phase.dims();
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * h * w);
    buf.extend_from_slice(PHASE_MAGIC);
    buf.extend_from_slice(&(h as u32).to_le_bytes());
    buf.extend_from_slice(&(w as u32).to_le_bytes());
    for v in phase.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    buf
}

pub fn decode_phase(bytes: &[u8], path: &Path) -> Result<PhaseMask> {
    let bad = |offset: usize, reason: String| Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason,
    };
    if bytes.len() < PHASE_MAGIC.len() || &bytes[..8] != PHASE_MAGIC {
        return Err(bad(0, "missing HOLOPHS1 magic".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(bad(bytes.len(), "truncated header".into()));
    }
    let h = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let w = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    if h == 0 || w == 0 {
        return Err(bad(8, format!("degenerate dimensions {h}x{w}")));
    }
    let expected = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or_else(|| bad(8, format!("dimensions {h}x{w} overflow")))?;
    if bytes.len() < expected {
        return Err(bad(
            bytes.len(),
            format!(
                "truncated payload: expected {expected} bytes, found {}",
                bytes.len()
            ),
        ));
    }
    if bytes.len() > expected {
        return Err(bad(expected, "trailing bytes after payload".into()));
    }
    let mut values = Vec::with_capacity(h * w);
    for (i, chunk) in bytes[HEADER_LEN..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(bad(HEADER_LEN + 8 * i, "non-finite phase value".into()));
        }
        values.push(v);
    }
    PhaseMask::new(h, w, values)
}

pub fn save_phase(phase: &PhaseMask, path: &Path) -> Result<()> {
    fs::write(path, encode_phase(phase)).map_err(|e| Error::io(path, e))
}

pub fn load_phase(path: &Path) -> Result<PhaseMask> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_phase(&bytes, path)
}

/// Gray level for a phase: `floor(φ/2π · 256)` on the canonical phase,
/// clamped to 255.
pub fn phase_gray(p: f64) -> u8 {
    (canonical_phase(p) / TAU * 256.0).floor().min(255.0) as u8
}

pub fn save_phase_preview(phase: &PhaseMask, path: &Path) -> Result<()> {
    let (h, w) = phase.dims();
    let pixels = phase.values().iter().map(|&p| phase_gray(p)).collect();
    save_gray(path, w, h, pixels)
}

/// 8-bit levels of an image rescaled to peak 1; all zero stays black.
pub fn image_gray(image: &AmplitudeImage) -> Vec<u8> {
    let peak = image.max();
    image
        .values()
        .iter()
        .map(|&v| {
            if peak > 0.0 {
                (v / peak * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect()
}

pub fn save_image(image: &AmplitudeImage, path: &Path) -> Result<()> {
    let (h, w) = image.dims();
    save_gray(path, w, h, image_gray(image))
}

fn save_gray(path: &Path, w: usize, h: usize, pixels: Vec<u8>) -> Result<()> {
    let img: GrayImage = image::ImageBuffer::<Luma<u8>, _>::from_raw(w as u32, h as u32, pixels)
        .expect("buffer matches dimensions");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| image_err(path, e))
}

/// One labelled column of per-iteration values.
#[derive(Debug, Clone, Copy)]
pub struct Series<'a> {
    pub label: &'a str,
    pub values: &'a [f64],
}

/// CSV text with header `iteration,<label>...` and one row per iteration,
/// values in scientific notation with 9 significant digits.
pub fn loss_csv(series: &[Series<'_>]) -> Result<String> {
    let rows = series.first().map_or(0, |s| s.values.len());
    for s in series {
        if s.label.contains([',', '"', '\n', '\r']) {
            return Err(Error::InvalidInput(format!(
                "CSV label {:?} contains a delimiter",
                s.label
            )));
        }
        if s.values.len() != rows {
            return Err(Error::Length {
                expected: rows,
                found: s.values.len(),
            });
        }
    }
    let mut out = String::from("iteration");
    for s in series {
        out.push(',');
        out.push_str(s.label);
    }
    out.push('\n');
    for i in 0..rows {
        write!(out, "{i}").unwrap();
        for s in series {
            write!(out, ",{:.8e}", s.values[i]).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_loss_csv(series: &[Series<'_>], path: &Path) -> Result<()> {
    let text = loss_csv(series)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn write_pgm(dir: &Path, name: &str, w: usize, h: usize, px: &[u8]) -> std::path::PathBuf {
        let path = dir.join(name);
        let mut bytes = format!("P5\n{w} {h}\n255\n").into_bytes();
        bytes.extend_from_slice(px);
        fs::write(&path, bytes).unwrap();
        path
    }

    #[test]
    fn pgm_native_size() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_pgm(dir.path(), "a.pgm", 2, 2, &[0, 255, 255, 0]);
        let img = load_target(&p, None).unwrap();
        assert_eq!(img.values(), &[0.0, 1.0, 1.0, 0.0]);
        let black = write_pgm(dir.path(), "b.pgm", 3, 2, &[0; 6]);
        assert!(load_target(&black, None)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn constant_downsize_and_rgb_luma() {
        let dir = tempfile::tempdir().unwrap();
        let p = write_pgm(dir.path(), "c.pgm", 4, 4, &[51; 16]);
        let img = load_target(&p, Some((2, 2))).unwrap();
        for v in img.values() {
            assert!((v - 0.2).abs() < 1e-15);
        }
        let rgb = image::RgbImage::from_pixel(3, 3, image::Rgb([255, 0, 100]));
        let rp = dir.path().join("rgb.png");
        rgb.save(&rp).unwrap();
        let img = load_target(&rp, Some((2, 3))).unwrap();
        let want = (0.299 * 255.0 + 0.114 * 100.0) / 255.0;
        for v in img.values() {
            assert!((v - want).abs() < 1e-12);
        }
    }

    #[test]
    fn area_resample_is_mean_preserving() {
        let data: Vec<f64> = (0..35).map(|i| (i * 7 % 11) as f64).collect();
        let mean: f64 = data.iter().sum::<f64>() / 35.0;
        for to in [(3, 2), (5, 7), (10, 3), (1, 1)] {
            let out = area_resample(&data, (5, 7), to);
            let m: f64 = out.iter().sum::<f64>() / out.len() as f64;
            assert!((m - mean).abs() < 1e-12, "{to:?}");
        }
        // 2x2 blocks
        let out = area_resample(&[1.0, 3.0, 5.0, 7.0], (2, 2), (1, 1));
        assert_eq!(out, vec![4.0]);
    }

    #[test]
    fn unreadable_target() {
        let dir = tempfile::tempdir().unwrap();
        let missing = dir.path().join("nope.png");
        assert!(matches!(load_target(&missing, None), Err(Error::Io { .. })));
        let junk = dir.path().join("junk.png");
        fs::write(&junk, b"not an image at all").unwrap();
        assert!(load_target(&junk, None).is_err());
    }

    #[test]
    fn phase_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let mask = crate::pipeline::initial_phase((5, 3), 9).unwrap();
        let path = dir.path().join("m.holophs");
        save_phase(&mask, &path).unwrap();
        let back = load_phase(&path).unwrap();
        assert!(mask
            .values()
            .iter()
            .zip(back.values())
            .all(|(a, b)| a.to_bits() == b.to_bits()));

        let bytes = fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 16 + 8 * 15);
        let trunc = decode_phase(&bytes[..bytes.len() - 3], &path);
        assert!(matches!(trunc, Err(Error::Format { offset, .. }) if offset == 133));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            decode_phase(&bad, &path),
            Err(Error::Format { offset: 0, .. })
        ));
        assert!(matches!(
            decode_phase(&bytes[..12], &path),
            Err(Error::Format { offset: 12, .. })
        ));
        let mut nan = bytes.clone();
        nan[24..32].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(
            decode_phase(&nan, &path),
            Err(Error::Format { offset: 24, .. })
        ));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(
            decode_phase(&long, &path),
            Err(Error::Format { offset: 136, .. })
        ));
    }

    #[test]
    fn preview_levels() {
        assert_eq!(phase_gray(0.0), 0);
        assert_eq!(phase_gray(PI), 128);
        assert_eq!(phase_gray(TAU - 1e-12), 255);
        assert_eq!(phase_gray(-1e-300), 0);
    }

    #[test]
    fn image_levels() {
        let img = AmplitudeImage::new(1, 3, vec![0.0, 2.0, 4.0]).unwrap();
        assert_eq!(image_gray(&img), vec![0, 128, 255]);
        let zero = AmplitudeImage::new(1, 2, vec![0.0, 0.0]).unwrap();
        assert_eq!(image_gray(&zero), vec![0, 0]);
    }

    #[test]
    fn image_png_round_trip_within_quantization() {
        let dir = tempfile::tempdir().unwrap();
        let values: Vec<f64> = (0..48).map(|i| ((i * 37) % 101) as f64 * 0.013).collect();
        let img = AmplitudeImage::new(6, 8, values).unwrap();
        let path = dir.path().join("r.png");
        save_image(&img, &path).unwrap();
        let back = load_target(&path, None).unwrap();
        let scaled = img.peak_normalized();
        for (a, b) in scaled.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1.0 / 255.0);
        }
        assert_eq!(back.max(), 1.0);
    }

    #[test]
    fn unwritable_image_path() {
        let img = AmplitudeImage::new(2, 2, vec![1.0; 4]).unwrap();
        let r = save_image(&img, Path::new("/nonexistent-dir/x/y.png"));
        assert!(matches!(r, Err(Error::Io { .. })));
    }

    #[test]
    fn csv_format() {
        let a = [0.5, 0.25];
        let text = loss_csv(&[Series {
            label: "mse",
            values: &a,
        }])
        .unwrap();
        assert_eq!(text, "iteration,mse\n0,5.00000000e-1\n1,2.50000000e-1\n");
        assert_eq!(text.lines().count(), 3);
        assert!(loss_csv(&[Series {
            label: "a,b",
            values: &a
        }])
        .is_err());
        let b = [1.0];
        assert!(matches!(
            loss_csv(&[
                Series {
                    label: "a",
                    values: &a
                },
                Series {
                    label: "b",
                    values: &b
                }
            ]),
            Err(Error::Length { .. })
        ));
    }
}
