//! Binary weight file.
//!
//! ```text
//! "FCNN1"                      5-byte magic + version
//! u32 layer_count
//! per layer:
//!   u32 out_channels, u32 in_channels, u32 kernel_h, u32 kernel_w
//!   f32 weights[out][in][kh][kw]
//!   f32 bias[out]
//! ```
//!
//! All integers and reals are little-endian.

use std::fs;
use std::path::Path;

use super::layer::{ConvLayer, KERNEL_SIZE};
use super::network::{FeatureNetwork, NUM_LAYERS};
use crate::error::{FormatError, Result};

pub const WEIGHTS_MAGIC: &[u8; 5] = b"FCNN1";
const FAMILY: &[u8; 4] = b"FCNN";

pub fn encode_weights(net: &FeatureNetwork<f32>) -> Vec<u8> {
    let mut out = WEIGHTS_MAGIC.to_vec();
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for layer in net.layers() {
        for v in [
            layer.out_channels(),
            layer.in_channels(),
            KERNEL_SIZE,
            KERNEL_SIZE,
        ] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        for v in layer.weights().iter().chain(layer.bias()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_weights(bytes: &[u8]) -> std::result::Result<FeatureNetwork<f32>, FormatError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic = r.take(WEIGHTS_MAGIC.len())?;
    if magic != WEIGHTS_MAGIC {
        let shown = String::from_utf8_lossy(magic).into_owned();
        return Err(if magic.starts_with(FAMILY) {
            FormatError::UnsupportedVersion(shown)
        } else {
            FormatError::UnsupportedFormat(shown)
        });
    }
    let count = r.u32()? as usize;
    if count != NUM_LAYERS {
        return Err(FormatError::BadLayer {
            layer: 0,
            reason: format!("{count} layers, expected {NUM_LAYERS}"),
        });
    }
    let mut layers = Vec::with_capacity(NUM_LAYERS);
    let mut expected_in = 1usize;
    for idx in 1..=count {
        let bad = |reason: String| FormatError::BadLayer { layer: idx, reason };
        let out_c = r.u32()? as usize;
        let in_c = r.u32()? as usize;
        let (kh, kw) = (r.u32()? as usize, r.u32()? as usize);
        if (kh, kw) != (KERNEL_SIZE, KERNEL_SIZE) {
            return Err(bad(format!("{kh}x{kw} kernel, only 3x3 is supported")));
        }
        if out_c == 0 {
            return Err(bad("zero output channels".into()));
        }
        if in_c != expected_in {
            return Err(bad(format!(
                "{in_c} input channels, previous layer emits {expected_in}"
            )));
        }
        let n_weights = out_c
            .checked_mul(in_c)
            .and_then(|n| n.checked_mul(kh * kw))
            .ok_or_else(|| bad("layer size overflows".into()))?;
        let weights = r.f32s(n_weights)?;
        let bias = r.f32s(out_c)?;
        let layer = ConvLayer::new(out_c, in_c, weights, bias).map_err(|e| bad(e.to_string()))?;
        layers.push(layer);
        expected_in = out_c;
    }
    if r.pos != bytes.len() {
        return Err(FormatError::TrailingData(bytes.len() - r.pos));
    }
    FeatureNetwork::new(layers).map_err(|e| FormatError::BadLayer {
        layer: 0,
        reason: e.to_string(),
    })
}

pub fn save_weights(net: &FeatureNetwork<f32>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_weights(net))?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<FeatureNetwork<f32>> {
    let bytes = fs::read(path)?;
    Ok(decode_weights(&bytes)?)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(FormatError::Truncated {
                expected: self.pos.saturating_add(n),
                found: self.bytes.len(),
            }),
        }
    }

    fn u32(&mut self) -> std::result::Result<u32, FormatError> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f32s(&mut self, n: usize) -> std::result::Result<Vec<f32>, FormatError> {
        let len = n
            .checked_mul(4)
            .ok_or(FormatError::MalformedHeader("layer size overflows"))?;
        let raw = self.take(len)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}
