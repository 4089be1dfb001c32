//! Binary netpbm images: P6 (PPM) for RGB input, P5 (PGM) for heatmaps.
//!
//! Both use maxval 255. Pixel values map to [0, 1] on read; writers round
//! to the nearest byte (half away from zero). PGM heatmaps are written at
//! grid resolution with an optional integer nearest-neighbor upscale.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::psm::PatchSignificanceMap;
use crate::tensor::Tensor;

// Pulls "P6"/"P5", width, height, maxval off the front; returns the
// payload offset. Whitespace-separated tokens, `#` comments allowed.
fn parse_header(bytes: &[u8], magic: &str) -> Result<(usize, usize, usize)> {
    if bytes.len() < 2 || &bytes[..2] != magic.as_bytes() {
        return Err(Error::Format(format!("missing {magic} magic header")));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // Skip whitespace and comments.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("malformed netpbm header".into()));
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .map_err(|_| Error::Format("malformed netpbm header".into()))?
            .parse()
            .map_err(|_| Error::Format("malformed netpbm header".into()))?;
    }
    if fields[2] != 255 {
        return Err(Error::Format(format!(
            "only maxval 255 is supported, got {}",
            fields[2]
        )));
    }
    if fields[0] == 0 || fields[1] == 0 {
        return Err(Error::Format("image extents must be positive".into()));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Format("malformed netpbm header".into()));
    }
    Ok((fields[0], fields[1], pos + 1))
}

fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Reads a binary PPM (P6) into a channel-first `[3, H, W]` tensor with
/// values in [0, 1].
pub fn read_ppm(path: &Path) -> Result<Tensor> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let (w, h, offset) = parse_header(&bytes, "P6")?;
    let need = 3 * w * h;
    let payload = &bytes[offset..];
    if payload.len() < need {
        return Err(Error::Format(format!(
            "truncated PPM payload: need {need} bytes, have {}",
            payload.len()
        )));
    }
    let mut data = vec![0.0f32; need];
    for y in 0..h {
        for x in 0..w {
            for c in 0..3 {
                data[(c * h + y) * w + x] = payload[(y * w + x) * 3 + c] as f32 / 255.0;
            }
        }
    }
    Tensor::new(vec![3, h, w], data)
}

/// Writes a `[3, H, W]` tensor as binary PPM (P6), maxval 255.
pub fn write_ppm(path: &Path, image: &Tensor) -> Result<()> {
    if image.rank() != 3 || image.dims()[0] != 3 {
        return Err(Error::ShapeMismatch(format!(
            "PPM writer expects [3, H, W], got {:?}",
            image.dims()
        )));
    }
    let (h, w) = (image.dims()[1], image.dims()[2]);
    let mut writer = BufWriter::new(File::create(path)?);
    write!(writer, "P6\n{w} {h}\n255\n")?;
    let data = image.data();
    let mut row = Vec::with_capacity(3 * w);
    for y in 0..h {
        row.clear();
        for x in 0..w {
            for c in 0..3 {
                row.push(quantize(data[(c * h + y) * w + x]));
            }
        }
        writer.write_all(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Reads a binary PGM (P5) into an `[h, w]` tensor with values in [0, 1].
pub fn read_pgm(path: &Path) -> Result<Tensor> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let (w, h, offset) = parse_header(&bytes, "P5")?;
    let payload = &bytes[offset..];
    if payload.len() < w * h {
        return Err(Error::Format(format!(
            "truncated PGM payload: need {} bytes, have {}",
            w * h,
            payload.len()
        )));
    }
    let data: Vec<f32> = payload[..w * h].iter().map(|&b| b as f32 / 255.0).collect();
    Tensor::new(vec![h, w], data)
}

/// Writes an `[h, w]` tensor in [0, 1] as binary PGM (P5), maxval 255.
pub fn write_pgm(path: &Path, map: &Tensor) -> Result<()> {
    if map.rank() != 2 {
        return Err(Error::ShapeMismatch(format!(
            "PGM writer expects [h, w], got {:?}",
            map.dims()
        )));
    }
    let (h, w) = (map.dims()[0], map.dims()[1]);
    let mut writer = BufWriter::new(File::create(path)?);
    write!(writer, "P5\n{w} {h}\n255\n")?;
    let bytes: Vec<u8> = map.data().iter().map(|&v| quantize(v)).collect();
    writer.write_all(&bytes)?;
    writer.flush()?;
    Ok(())
}

/// Writes a normalized significance map as a PGM heatmap, byte value
/// `round(255 * p)`, optionally upscaled by an integer factor for
/// legibility.
pub fn write_heatmap(psm: &PatchSignificanceMap, path: &Path, scale: usize) -> Result<()> {
    if scale == 0 {
        return Err(Error::InvalidArgument("heatmap scale must be >= 1".into()));
    }
    let values = psm.values();
    if values.rank() != 2 {
        return Err(Error::ShapeMismatch(
            "heatmap writer expects an image-grid map; slice video maps per frame".into(),
        ));
    }
    if values.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidArgument(
            "heatmap requires a normalized map in [0, 1]".into(),
        ));
    }
    let (h, w) = (values.dims()[0], values.dims()[1]);
    if scale == 1 {
        return write_pgm(path, values);
    }
    let mut up = vec![0.0f32; h * scale * w * scale];
    for y in 0..h * scale {
        for x in 0..w * scale {
            up[y * w * scale + x] = values.data()[(y / scale) * w + x / scale];
        }
    }
    write_pgm(path, &Tensor::new(vec![h * scale, w * scale], up)?)
}
