//! PGM/PNG silhouette reading, PGM writing and PPM overlays.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{BinarySilhouette, Grid};
use crate::geometry::Projection2;

const PNG_SIGNATURE: &[u8] = b"\x89PNG\r\n\x1a\n";

/// Reads a mask from PGM (P2/P5) or 8-bit grayscale PNG. Pixels at or above
/// 128 (on a 0..255 scale) are foreground.
pub fn read_silhouette(path: impl AsRef<Path>) -> Result<BinarySilhouette> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let context = path.display().to_string();
    if bytes.starts_with(PNG_SIGNATURE) {
        decode_png(&bytes, &context)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(&bytes, &context)
    } else {
        Err(Error::UnsupportedFormat(format!("{context}: not a PGM or PNG file")))
    }
}

/// Header tokenizer that skips whitespace and `#` comments.
struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Header<'a> {
    fn token(&mut self) -> Option<&'a [u8]> {
        loop {
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos < self.bytes.len() && self.bytes[self.pos] == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        (self.pos > start).then(|| &self.bytes[start..self.pos])
    }

    fn number(&mut self, context: &str, what: &str) -> Result<usize> {
        let tok = self
            .token()
            .ok_or_else(|| Error::parse(context, format!("missing {what}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::parse(context, format!("bad {what}")))
    }
}

pub fn decode_pgm(bytes: &[u8], context: &str) -> Result<BinarySilhouette> {
    let mut header = Header { bytes, pos: 0 };
    let magic = header.token().unwrap_or_default();
    let binary = match magic {
        b"P5" => true,
        b"P2" => false,
        _ => return Err(Error::UnsupportedFormat(format!("{context}: unknown PGM magic"))),
    };
    let width = header.number(context, "width")?;
    let height = header.number(context, "height")?;
    let maxval = header.number(context, "maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::parse(context, "zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::parse(context, format!("maxval {maxval} out of range")));
    }
    let count = width * height;
    let mut values = Vec::with_capacity(count);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        let start = header.pos + 1;
        let sample = if maxval < 256 { 1 } else { 2 };
        let raster = bytes
            .get(start..start + count * sample)
            .ok_or_else(|| Error::parse(context, "truncated raster"))?;
        if sample == 1 {
            values.extend(raster.iter().map(|&b| b as usize));
        } else {
            values.extend(raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as usize));
        }
    } else {
        for _ in 0..count {
            values.push(header.number(context, "pixel value")?);
        }
    }
    if values.iter().any(|&v| v > maxval) {
        return Err(Error::parse(context, "pixel value exceeds maxval"));
    }
    let mask = values.iter().map(|&v| (v * 255 >= 128 * maxval) as u8).collect();
    BinarySilhouette::new(width, height, mask)
}

fn decode_png(bytes: &[u8], context: &str) -> Result<BinarySilhouette> {
    let decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    let mut reader = decoder
        .read_info()
        .map_err(|e| Error::parse(context, e.to_string()))?;
    let info = reader.info();
    if info.color_type != png::ColorType::Grayscale || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::UnsupportedFormat(format!(
            "{context}: only 8-bit grayscale PNG is supported"
        )));
    }
    let (width, height) = (info.width as usize, info.height as usize);
    let mut buf = vec![0u8; reader.output_buffer_size().unwrap_or(width * height)];
    let frame = reader
        .next_frame(&mut buf)
        .map_err(|e| Error::parse(context, e.to_string()))?;
    let mut mask = Vec::with_capacity(width * height);
    for row in 0..height {
        let line = &buf[row * frame.line_size..row * frame.line_size + width];
        mask.extend(line.iter().map(|&v| (v >= 128) as u8));
    }
    BinarySilhouette::new(width, height, mask)
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Binary PGM (P5) with foreground 255 and background 0.
pub fn encode_silhouette_pgm(sil: &BinarySilhouette) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", sil.width, sil.height).into_bytes();
    out.extend(sil.mask.iter().map(|&v| v * 255));
    out
}

pub fn write_silhouette(sil: &BinarySilhouette, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_silhouette_pgm(sil))
}

/// Writes a grid of values in `[0, 1]` as an 8-bit binary PGM.
pub fn write_grid_pgm(grid: &Grid, path: impl AsRef<Path>) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", grid.width, grid.height).into_bytes();
    out.extend(grid.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
    write_bytes(path.as_ref(), &out)
}

const FOREGROUND_GRAY: u8 = 200;
const BACKGROUND_GRAY: u8 = 40;
const DOT: [u8; 3] = [40, 90, 255];

/// RGB PPM of the mask in gray with every valid projection drawn as a 3x3 dot.
pub fn encode_overlay(sil: &BinarySilhouette, projections: &[Option<Projection2>]) -> Vec<u8> {
    let (w, h) = (sil.width, sil.height);
    let mut rgb: Vec<u8> = sil
        .mask
        .iter()
        .flat_map(|&m| [if m == 1 { FOREGROUND_GRAY } else { BACKGROUND_GRAY }; 3])
        .collect();
    for p in projections.iter().flatten() {
        if !(p.uv.x.is_finite() && p.uv.y.is_finite()) {
            continue;
        }
        let (cx, cy) = (p.uv.x.floor(), p.uv.y.floor());
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (x, y) = (cx + dx as f64, cy + dy as f64);
                if x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64 {
                    let k = 3 * (y as usize * w + x as usize);
                    rgb[k..k + 3].copy_from_slice(&DOT);
                }
            }
        }
    }
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.extend(rgb);
    out
}

pub fn write_overlay(
    sil: &BinarySilhouette,
    projections: &[Option<Projection2>],
    path: impl AsRef<Path>,
) -> Result<()> {
    write_bytes(path.as_ref(), &encode_overlay(sil, projections))
}
