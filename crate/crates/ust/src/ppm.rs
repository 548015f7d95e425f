//! Binary PPM (P6) images, 8 bits per channel.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use ust_core::features::RgbImage;

#[derive(Debug, thiserror::Error)]
pub enum PpmError {
    #[error("not a binary PPM (P6) file")]
    BadMagic,
    #[error("malformed PPM header: {0}")]
    Header(&'static str),
    #[error("only 8-bit PPM is supported (maxval {0})")]
    MaxVal(u32),
    #[error("PPM data truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Reads the header token at `pos`, skipping whitespace and `#` comments.
fn token(data: &[u8], pos: &mut usize) -> Result<u32, PpmError> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < data.len() && data[*pos].is_ascii_digit() {
        *pos += 1;
    }
    if start == *pos {
        return Err(PpmError::Header("expected a number"));
    }
    std::str::from_utf8(&data[start..*pos])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or(PpmError::Header("number out of range"))
}

pub fn decode(data: &[u8]) -> Result<RgbImage, PpmError> {
    if data.len() < 2 || &data[..2] != b"P6" {
        return Err(PpmError::BadMagic);
    }
    let mut pos = 2;
    let width = token(data, &mut pos)? as usize;
    let height = token(data, &mut pos)? as usize;
    let maxval = token(data, &mut pos)?;
    if width == 0 || height == 0 {
        return Err(PpmError::Header("zero image extent"));
    }
    if maxval == 0 || maxval > 255 {
        return Err(PpmError::MaxVal(maxval));
    }
    // Exactly one whitespace byte separates the header from the raster.
    if pos >= data.len() || !data[pos].is_ascii_whitespace() {
        return Err(PpmError::Header("missing separator before raster"));
    }
    pos += 1;
    let expected = width * height * 3;
    let raster = &data[pos..];
    if raster.len() < expected {
        return Err(PpmError::Truncated { expected, found: raster.len() });
    }
    let scale = maxval as f64;
    let pixels = raster[..expected]
        .chunks_exact(3)
        .map(|p| [p[0] as f64 / scale, p[1] as f64 / scale, p[2] as f64 / scale])
        .collect();
    Ok(RgbImage::new(width, height, pixels).expect("raster length matches extent"))
}

pub fn encode(img: &RgbImage) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.pixels().len() * 3);
    out.extend_from_slice(header.as_bytes());
    for p in img.pixels() {
        for c in p {
            out.push((c.clamp(0.0, 1.0) * 255.0).round() as u8);
        }
    }
    out
}

pub fn read(path: &Path) -> Result<RgbImage, PpmError> {
    decode(&fs::read(path)?)
}

pub fn write(path: &Path, img: &RgbImage) -> Result<(), PpmError> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(&encode(img))?;
    w.flush()?;
    Ok(())
}
