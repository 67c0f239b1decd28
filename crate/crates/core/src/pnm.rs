//! Minimal netpbm codec: grayscale PGM (P2/P5) and bitmap PBM (P1/P4).
//!
//! Images map to two-dimensional grids with `h = 1`, row-major, row 0 first.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{DiscreteFunction, DiscreteSet, GridDomain};

struct Header {
    magic: [u8; 2],
    width: usize,
    height: usize,
    maxval: usize,
    data_start: usize,
}

/// Reads the next whitespace-separated token, skipping `#` comments.
fn next_token(bytes: &[u8], pos: &mut usize) -> Option<(usize, usize)> {
    while *pos < bytes.len() {
        match bytes[*pos] {
            b'#' => {
                while *pos < bytes.len() && bytes[*pos] != b'\n' {
                    *pos += 1;
                }
            }
            c if c.is_ascii_whitespace() => *pos += 1,
            _ => break,
        }
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() && bytes[*pos] != b'#' {
        *pos += 1;
    }
    (start < *pos).then_some((start, *pos))
}

fn header_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let (a, b) = next_token(bytes, pos)
        .ok_or_else(|| Error::MalformedHeader(format!("missing {what}")))?;
    std::str::from_utf8(&bytes[a..b])
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::MalformedHeader(format!("bad {what}")))
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(Error::MalformedHeader("missing netpbm magic number".into()));
    }
    let magic = [bytes[0], bytes[1]];
    match magic[1] {
        b'1' | b'2' | b'4' | b'5' => {}
        b'3' | b'6' => {
            return Err(Error::UnsupportedFormat("color PPM images are not supported".into()))
        }
        b'7' => return Err(Error::UnsupportedFormat("PAM images are not supported".into())),
        _ => return Err(Error::MalformedHeader("unknown netpbm magic number".into())),
    }
    let mut pos = 2;
    let width = header_number(bytes, &mut pos, "width")?;
    let height = header_number(bytes, &mut pos, "height")?;
    if width == 0 || height == 0 {
        return Err(Error::MalformedHeader("empty image".into()));
    }
    let maxval = if matches!(magic[1], b'2' | b'5') {
        let m = header_number(bytes, &mut pos, "maxval")?;
        if m == 0 || m > 65535 {
            return Err(Error::MalformedHeader(format!("maxval {m} outside 1..=65535")));
        }
        m
    } else {
        1
    };
    // Binary rasters start after exactly one whitespace byte.
    if matches!(magic[1], b'4' | b'5') {
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(Error::MalformedHeader("missing separator before raster".into()));
        }
        pos += 1;
    }
    Ok(Header {
        magic,
        width,
        height,
        maxval,
        data_start: pos,
    })
}

fn ascii_samples(bytes: &[u8], mut pos: usize, count: usize, max: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let v = header_number(bytes, &mut pos, "sample")
            .map_err(|_| Error::MalformedHeader("truncated or invalid raster".into()))?;
        if v > max {
            return Err(Error::MalformedHeader(format!("sample {v} exceeds {max}")));
        }
        out.push(v);
    }
    Ok(out)
}

/// Decodes a PGM image into values in `[0, 1]`.
pub fn parse_pgm(bytes: &[u8]) -> Result<DiscreteFunction> {
    let hd = parse_header(bytes)?;
    let count = hd.width * hd.height;
    let samples = match hd.magic[1] {
        b'2' => ascii_samples(bytes, hd.data_start, count, hd.maxval)?,
        b'5' => {
            let wide = hd.maxval > 255;
            let need = count * if wide { 2 } else { 1 };
            let raster = bytes
                .get(hd.data_start..hd.data_start + need)
                .ok_or_else(|| Error::MalformedHeader("truncated raster".into()))?;
            let s: Vec<usize> = if wide {
                raster
                    .chunks(2)
                    .map(|c| ((c[0] as usize) << 8) | c[1] as usize)
                    .collect()
            } else {
                raster.iter().map(|b| *b as usize).collect()
            };
            if let Some(v) = s.iter().find(|v| **v > hd.maxval) {
                return Err(Error::MalformedHeader(format!("sample {v} exceeds maxval")));
            }
            s
        }
        _ => return Err(Error::UnsupportedFormat("expected a P2 or P5 graymap".into())),
    };
    let grid = GridDomain::rect(hd.height, hd.width, 1.0)?;
    let m = hd.maxval as f64;
    DiscreteFunction::new(&grid, samples.iter().map(|v| *v as f64 / m).collect())
}

/// Encodes `u` as an 8-bit binary PGM, mapping `[lo, hi]` onto `[0, 255]` with clamping.
pub fn encode_pgm(u: &DiscreteFunction, lo: f64, hi: f64) -> Result<Vec<u8>> {
    let [rows, cols] = image_dims(u.grid());
    if !(hi > lo) {
        return Err(Error::InvalidParameter(format!("output range [{lo}, {hi}] is empty")));
    }
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    out.extend(u.values().iter().map(|v| {
        let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        (t * 255.0).round() as u8
    }));
    Ok(out)
}

/// Decodes a PBM bitmap; black pixels (1) are members.
pub fn parse_pbm(bytes: &[u8]) -> Result<DiscreteSet> {
    let hd = parse_header(bytes)?;
    let count = hd.width * hd.height;
    let bits: Vec<bool> = match hd.magic[1] {
        b'1' => {
            // Plain PBM digits need not be separated.
            let mut bits = Vec::with_capacity(count);
            let mut pos = hd.data_start;
            while bits.len() < count && pos < bytes.len() {
                match bytes[pos] {
                    b'0' => bits.push(false),
                    b'1' => bits.push(true),
                    b'#' => {
                        while pos < bytes.len() && bytes[pos] != b'\n' {
                            pos += 1;
                        }
                    }
                    c if c.is_ascii_whitespace() => {}
                    _ => return Err(Error::MalformedHeader("invalid PBM digit".into())),
                }
                pos += 1;
            }
            if bits.len() < count {
                return Err(Error::MalformedHeader("truncated raster".into()));
            }
            bits
        }
        b'4' => {
            let stride = hd.width.div_ceil(8);
            let raster = bytes
                .get(hd.data_start..hd.data_start + stride * hd.height)
                .ok_or_else(|| Error::MalformedHeader("truncated raster".into()))?;
            (0..count)
                .map(|k| {
                    let (r, c) = (k / hd.width, k % hd.width);
                    raster[r * stride + c / 8] >> (7 - c % 8) & 1 == 1
                })
                .collect()
        }
        _ => return Err(Error::UnsupportedFormat("expected a P1 or P4 bitmap".into())),
    };
    let grid = GridDomain::rect(hd.height, hd.width, 1.0)?;
    DiscreteSet::from_bits(&grid, bits)
}

/// Encodes the grid part of `set` as a binary PBM.
pub fn encode_pbm(set: &DiscreteSet) -> Vec<u8> {
    let [rows, cols] = image_dims(set.grid());
    let mut out = format!("P4\n{cols} {rows}\n").into_bytes();
    let stride = cols.div_ceil(8);
    for r in 0..rows {
        let mut row = vec![0u8; stride];
        for c in 0..cols {
            if set.contains(r * cols + c) {
                row[c / 8] |= 0x80 >> (c % 8);
            }
        }
        out.extend(row);
    }
    out
}

fn image_dims(grid: &GridDomain) -> [usize; 2] {
    // One-dimensional grids are written as a single row.
    if grid.n() == 1 {
        [1, grid.dims()[0]]
    } else {
        grid.dims()
    }
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<DiscreteFunction> {
    parse_pgm(&fs::read(path)?)
}

pub fn save_pgm(path: impl AsRef<Path>, u: &DiscreteFunction, lo: f64, hi: f64) -> Result<()> {
    fs::write(path, encode_pgm(u, lo, hi)?)?;
    Ok(())
}

pub fn load_pbm(path: impl AsRef<Path>) -> Result<DiscreteSet> {
    parse_pbm(&fs::read(path)?)
}

pub fn save_pbm(path: impl AsRef<Path>, set: &DiscreteSet) -> Result<()> {
    fs::write(path, encode_pbm(set))?;
    Ok(())
}
