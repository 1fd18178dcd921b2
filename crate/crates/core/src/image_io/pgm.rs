use std::fs;
use std::path::Path;

use super::GrayImage;
use crate::error::{FormatError, Result};

/// Reads a binary (P5) PGM with maxval 255.
pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    let bytes = fs::read(path)?;
    Ok(decode_pgm(&bytes)?)
}

pub fn save_pgm(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_pgm(img))?;
    Ok(())
}

pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend(img.to_bytes());
    out
}

/// Decodes a P5 PGM held in memory. Bytes after the payload are ignored,
/// which is how netpbm treats concatenated images.
pub fn decode_pgm(bytes: &[u8]) -> std::result::Result<GrayImage, FormatError> {
    if bytes.len() < 2 {
        return Err(FormatError::MalformedHeader("missing magic number"));
    }
    if &bytes[..2] != b"P5" {
        return Err(FormatError::UnsupportedFormat(
            String::from_utf8_lossy(&bytes[..2]).into_owned(),
        ));
    }
    let mut cursor = HeaderCursor { bytes, pos: 2 };
    let width = cursor.next_uint("width")?;
    let height = cursor.next_uint("height")?;
    let maxval = cursor.next_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(FormatError::MalformedHeader("zero image dimension"));
    }
    if maxval != 255 {
        return Err(FormatError::UnsupportedMaxval(maxval));
    }
    // exactly one whitespace byte separates maxval from the raster
    match bytes.get(cursor.pos) {
        Some(b) if b.is_ascii_whitespace() => cursor.pos += 1,
        _ => return Err(FormatError::MalformedHeader("no separator after maxval")),
    }
    let expected = (width as usize)
        .checked_mul(height as usize)
        .ok_or(FormatError::MalformedHeader("image dimensions overflow"))?;
    let payload = &bytes[cursor.pos..];
    if payload.len() < expected {
        return Err(FormatError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    let data = payload[..expected]
        .iter()
        .map(|&b| f32::from(b) / 255.0)
        .collect();
    Ok(GrayImage {
        width: width as usize,
        height: height as usize,
        data,
    })
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while let Some(&b) = self.bytes.get(self.pos) {
            if b == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn next_uint(&mut self, what: &'static str) -> std::result::Result<u32, FormatError> {
        let start = self.pos;
        self.skip_whitespace_and_comments();
        if self.pos == start {
            return Err(FormatError::MalformedHeader(what));
        }
        let digits_start = self.pos;
        let mut value: u32 = 0;
        while let Some(&b) = self.bytes.get(self.pos) {
            if !b.is_ascii_digit() {
                break;
            }
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(u32::from(b - b'0')))
                .ok_or(FormatError::MalformedHeader(what))?;
            self.pos += 1;
        }
        if self.pos == digits_start {
            return Err(FormatError::MalformedHeader(what));
        }
        Ok(value)
    }
}
