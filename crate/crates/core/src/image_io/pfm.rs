use std::fs;
use std::path::Path;

use super::DisparityMap;
use crate::error::{FormatError, Result};

pub fn save_pfm(map: &DisparityMap, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pfm(map))?;
    Ok(())
}

pub fn load_pfm(path: impl AsRef<Path>) -> Result<DisparityMap> {
    let bytes = fs::read(path)?;
    Ok(decode_pfm(&bytes)?)
}

/// Grayscale PFM, little-endian (scale `-1.0`), rows stored bottom-up.
/// Invalid pixels are written as negative infinity.
pub fn encode_pfm(map: &DisparityMap) -> Vec<u8> {
    let (w, h) = (map.width(), map.height());
    let mut out = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(w * h * 4);
    for y in (0..h).rev() {
        for x in 0..w {
            let v = map.get(x, y).unwrap_or(f32::NEG_INFINITY);
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8]) -> std::result::Result<DisparityMap, FormatError> {
    let (magic, rest) = next_token(bytes).ok_or(FormatError::MalformedHeader("missing magic"))?;
    match magic {
        b"Pf" => {}
        other => {
            return Err(FormatError::UnsupportedFormat(
                String::from_utf8_lossy(other).into_owned(),
            ))
        }
    }
    let (w, rest) = next_token(rest).ok_or(FormatError::MalformedHeader("missing width"))?;
    let (h, rest) = next_token(rest).ok_or(FormatError::MalformedHeader("missing height"))?;
    let (scale, rest) = next_token(rest).ok_or(FormatError::MalformedHeader("missing scale"))?;
    let width = parse_ascii::<usize>(w).ok_or(FormatError::MalformedHeader("bad width"))?;
    let height = parse_ascii::<usize>(h).ok_or(FormatError::MalformedHeader("bad height"))?;
    let scale = parse_ascii::<f32>(scale).ok_or(FormatError::MalformedHeader("bad scale"))?;
    if width == 0 || height == 0 {
        return Err(FormatError::MalformedHeader("zero image dimension"));
    }
    if scale == 0.0 || !scale.is_finite() {
        return Err(FormatError::MalformedHeader(
            "scale must be finite and nonzero",
        ));
    }
    let little_endian = scale < 0.0;
    let payload = match rest.split_first() {
        Some((b, payload)) if b.is_ascii_whitespace() => payload,
        _ => return Err(FormatError::MalformedHeader("no separator after scale")),
    };
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .ok_or(FormatError::MalformedHeader("image dimensions overflow"))?;
    if payload.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    if payload.len() > expected {
        return Err(FormatError::TrailingData(payload.len() - expected));
    }

    let mut data = vec![None; width * height];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little_endian {
            f32::from_le_bytes(raw)
        } else {
            f32::from_be_bytes(raw)
        };
        let (file_row, x) = (i / width, i % width);
        let y = height - 1 - file_row;
        data[y * width + x] = if v == f32::NEG_INFINITY {
            None
        } else if v.is_nan() {
            return Err(FormatError::InvalidValue {
                index: i,
                reason: "NaN",
            });
        } else if !v.is_finite() {
            return Err(FormatError::InvalidValue {
                index: i,
                reason: "positive infinity",
            });
        } else if v < 0.0 {
            return Err(FormatError::InvalidValue {
                index: i,
                reason: "negative disparity",
            });
        } else {
            Some(v)
        };
    }
    Ok(DisparityMap::from_raw(width, height, data))
}

fn next_token(bytes: &[u8]) -> Option<(&[u8], &[u8])> {
    let start = bytes.iter().position(|b| !b.is_ascii_whitespace())?;
    let rest = &bytes[start..];
    let end = rest
        .iter()
        .position(|b| b.is_ascii_whitespace())
        .unwrap_or(rest.len());
    Some((&rest[..end], &rest[end..]))
}

fn parse_ascii<T: std::str::FromStr>(token: &[u8]) -> Option<T> {
    std::str::from_utf8(token).ok()?.parse().ok()
}
