//! File formats: portable graymaps (P2/P5, 8- or 16-bit), the `SALMAP1`
//! binary float map, the `SALPYR1` feature-pyramid container, and
//! fixation lists (CSV "x,y" or nonzero-pixel graymaps). All binary
//! formats are little-endian. Concrete over f64.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::loss::perceptual::FeaturePyramid;
use crate::map::{FixationSet, SaliencyMap};
use crate::nn::Tensor3;

const SALMAP_MAGIC: &[u8; 8] = b"SALMAP1\0";
const SALPYR_MAGIC: &[u8; 8] = b"SALPYR1\0";

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Loads a saliency map, dispatching on the magic bytes: `SALMAP1\0`
/// float maps verbatim, P2/P5 graymaps scaled to [0,1] by their maxval.
pub fn load_map(path: &Path) -> Result<SaliencyMap<f64>> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.starts_with(SALMAP_MAGIC) {
        return parse_salmap(&bytes);
    }
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        return parse_graymap(&bytes);
    }
    Err(Error::Format(format!(
        "{}: unknown magic (expected SALMAP1, P2 or P5)",
        path.display()
    )))
}

pub fn save_salmap(path: &Path, map: &SaliencyMap<f64>) -> Result<()> {
    let mut out = Vec::with_capacity(16 + 8 * map.len());
    out.extend_from_slice(SALMAP_MAGIC);
    out.extend_from_slice(&(map.width() as u32).to_le_bytes());
    out.extend_from_slice(&(map.height() as u32).to_le_bytes());
    for v in map.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

fn parse_salmap(bytes: &[u8]) -> Result<SaliencyMap<f64>> {
    let need = |n: usize| -> Result<()> {
        if bytes.len() < n {
            Err(Error::Format("truncated SALMAP file".into()))
        } else {
            Ok(())
        }
    };
    need(16)?;
    let w = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let h = u32::from_le_bytes(bytes[12..16].try_into().unwrap()) as usize;
    let count = w
        .checked_mul(h)
        .ok_or_else(|| Error::Format("SALMAP dimensions overflow".into()))?;
    need(16 + 8 * count)?;
    let values: Vec<f64> = bytes[16..16 + 8 * count]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    SaliencyMap::new(w, h, values)
}

/// Header tokens (magic, width, height, maxval) allowing `#` comments.
struct PnmHeader {
    binary: bool,
    width: usize,
    height: usize,
    maxval: u32,
    data_start: usize,
}

fn parse_pnm_header(bytes: &[u8]) -> Result<PnmHeader> {
    let binary = match &bytes[..2] {
        b"P2" => false,
        b"P5" => true,
        _ => unreachable!("dispatched on magic"),
    };
    let mut fields = [0u32; 3];
    let mut field = 0;
    let mut pos = 2;
    while field < 3 {
        // skip whitespace and comment lines
        while pos < bytes.len() {
            match bytes[pos] {
                b'#' => {
                    while pos < bytes.len() && bytes[pos] != b'\n' {
                        pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => pos += 1,
                _ => break,
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(Error::Format("graymap: truncated header".into()));
        }
        let tok = std::str::from_utf8(&bytes[start..pos]).unwrap();
        fields[field] = tok
            .parse()
            .map_err(|_| Error::Format(format!("graymap: bad header token `{tok}`")))?;
        field += 1;
    }
    if binary {
        // exactly one whitespace byte separates maxval from raster data
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(Error::Format("graymap: missing raster separator".into()));
        }
        pos += 1;
    }
    let (width, height, maxval) = (fields[0] as usize, fields[1] as usize, fields[2]);
    if width == 0 || height == 0 {
        return Err(Error::Format("graymap: zero dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("graymap: unsupported maxval {maxval}")));
    }
    Ok(PnmHeader {
        binary,
        width,
        height,
        maxval,
        data_start: pos,
    })
}

fn parse_graymap(bytes: &[u8]) -> Result<SaliencyMap<f64>> {
    let raw = parse_graymap_raw(bytes)?;
    let scale = 1.0 / raw.maxval as f64;
    SaliencyMap::new(
        raw.width,
        raw.height,
        raw.samples.iter().map(|s| *s as f64 * scale).collect(),
    )
}

struct RawGraymap {
    width: usize,
    height: usize,
    maxval: u32,
    samples: Vec<u32>,
}

fn parse_graymap_raw(bytes: &[u8]) -> Result<RawGraymap> {
    let hdr = parse_pnm_header(bytes)?;
    let count = hdr.width * hdr.height;
    let samples: Vec<u32> = if hdr.binary {
        let per = if hdr.maxval > 255 { 2 } else { 1 };
        let data = &bytes[hdr.data_start..];
        if data.len() < count * per {
            return Err(Error::Format("graymap: truncated raster".into()));
        }
        if per == 2 {
            // P5 16-bit samples are big-endian per the format
            data[..count * 2]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as u32)
                .collect()
        } else {
            data[..count].iter().map(|b| *b as u32).collect()
        }
    } else {
        let text = std::str::from_utf8(&bytes[hdr.data_start..])
            .map_err(|_| Error::Format("graymap: non-ASCII raster".into()))?;
        let mut samples = Vec::with_capacity(count);
        for tok in text.split_ascii_whitespace() {
            samples.push(
                tok.parse::<u32>()
                    .map_err(|_| Error::Format(format!("graymap: bad sample `{tok}`")))?,
            );
        }
        if samples.len() < count {
            return Err(Error::Format("graymap: truncated raster".into()));
        }
        samples.truncate(count);
        samples
    };
    if samples.iter().any(|s| *s > hdr.maxval) {
        return Err(Error::Format("graymap: sample exceeds maxval".into()));
    }
    Ok(RawGraymap {
        width: hdr.width,
        height: hdr.height,
        maxval: hdr.maxval,
        samples,
    })
}

/// Loads fixations from a CSV of 0-based "x,y" lines, or from a graymap
/// whose nonzero pixels mark fixations. An empty CSV gives an empty set.
pub fn load_fixations(path: &Path, width: usize, height: usize) -> Result<FixationSet> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        let raw = parse_graymap_raw(&bytes)?;
        if (raw.width, raw.height) != (width, height) {
            return Err(Error::DimensionMismatch {
                expected: (width, height),
                got: (raw.width, raw.height),
            });
        }
        let points = raw
            .samples
            .iter()
            .enumerate()
            .filter(|(_, s)| **s != 0)
            .map(|(i, _)| (i % width, i / width))
            .collect();
        return FixationSet::new(points, width, height);
    }

    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Error::Format(format!("{}: fixation CSV is not UTF-8", path.display())))?;
    let mut points = Vec::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (xs, ys) = line.split_once(',').ok_or_else(|| {
            Error::Format(format!(
                "{}:{}: expected `x,y`",
                path.display(),
                lineno + 1
            ))
        })?;
        let parse = |s: &str| {
            s.trim().parse::<usize>().map_err(|_| {
                Error::Format(format!(
                    "{}:{}: bad coordinate `{}`",
                    path.display(),
                    lineno + 1,
                    s.trim()
                ))
            })
        };
        points.push((parse(xs)?, parse(ys)?));
    }
    FixationSet::new(points, width, height)
}

const SALWTS_MAGIC: &[u8; 8] = b"SALWTS1\0";

/// Saves a flat parameter vector (signed values allowed, unlike maps).
pub fn save_weights(path: &Path, weights: &[f64]) -> Result<()> {
    let mut out = Vec::with_capacity(12 + 8 * weights.len());
    out.extend_from_slice(SALWTS_MAGIC);
    out.extend_from_slice(&(weights.len() as u32).to_le_bytes());
    for v in weights {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

pub fn load_weights(path: &Path) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if !bytes.starts_with(SALWTS_MAGIC) || bytes.len() < 12 {
        return Err(Error::Format(format!(
            "{}: bad weights magic",
            path.display()
        )));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    if bytes.len() < 12 + 8 * count {
        return Err(Error::Format("truncated weights file".into()));
    }
    let weights: Vec<f64> = bytes[12..12 + 8 * count]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    if weights.iter().any(|v| !v.is_finite()) {
        return Err(Error::Format("weights contain non-finite values".into()));
    }
    Ok(weights)
}

pub fn save_pyramid(path: &Path, pyramid: &FeaturePyramid<f64>) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(SALPYR_MAGIC);
    out.extend_from_slice(&(pyramid.layers.len() as u32).to_le_bytes());
    for layer in &pyramid.layers {
        out.extend_from_slice(&(layer.channels as u32).to_le_bytes());
        out.extend_from_slice(&(layer.height as u32).to_le_bytes());
        out.extend_from_slice(&(layer.width as u32).to_le_bytes());
        for v in &layer.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = fs::File::create(path).map_err(|e| io_err(path, e))?;
    f.write_all(&out).map_err(|e| io_err(path, e))
}

pub fn load_pyramid(path: &Path) -> Result<FeaturePyramid<f64>> {
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    if !bytes.starts_with(SALPYR_MAGIC) {
        return Err(Error::Format(format!(
            "{}: bad pyramid magic",
            path.display()
        )));
    }
    let mut pos = 8;
    let read_u32 = |pos: &mut usize| -> Result<u32> {
        if bytes.len() < *pos + 4 {
            return Err(Error::Format("truncated pyramid file".into()));
        }
        let v = u32::from_le_bytes(bytes[*pos..*pos + 4].try_into().unwrap());
        *pos += 4;
        Ok(v)
    };
    let n_layers = read_u32(&mut pos)? as usize;
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let c = read_u32(&mut pos)? as usize;
        let h = read_u32(&mut pos)? as usize;
        let w = read_u32(&mut pos)? as usize;
        let count = c
            .checked_mul(h)
            .and_then(|v| v.checked_mul(w))
            .ok_or_else(|| Error::Format("pyramid layer dimensions overflow".into()))?;
        if bytes.len() < pos + 8 * count {
            return Err(Error::Format("truncated pyramid file".into()));
        }
        let data: Vec<f64> = bytes[pos..pos + 8 * count]
            .chunks_exact(8)
            .map(|ch| f64::from_le_bytes(ch.try_into().unwrap()))
            .collect();
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("pyramid contains non-finite values".into()));
        }
        pos += 8 * count;
        layers.push(Tensor3::from_data(c, h, w, data));
    }
    Ok(FeaturePyramid { layers })
}
