//! Census transform and Hamming-distance matching cost.
//!
//! Each pixel is described by a bit string over its `(2r+1)²` window, center
//! excluded, in row-major order. Bit `k` is set iff the center is strictly
//! brighter than the `k`-th neighbor. Two descriptors are compared by the
//! number of differing bits.

use rayon::prelude::*;

use crate::error::{dim_err, Error, Result};
use crate::image_io::{CostVolume, GrayImage};

pub const DEFAULT_RADIUS: usize = 4;

/// Per-pixel census bit strings packed into `u64` words.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CensusGrid {
    width: usize,
    height: usize,
    radius: usize,
    words: usize,
    bits: Vec<u64>,
    defined: Vec<bool>,
}

impl CensusGrid {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    /// Bits per descriptor, `(2r+1)² - 1`.
    pub fn string_len(&self) -> usize {
        string_len(self.radius)
    }

    /// `false` for pixels whose window leaves the image.
    pub fn is_defined(&self, x: usize, y: usize) -> bool {
        self.defined[y * self.width + x]
    }

    /// Packed words for one pixel; bit `k` lives in word `k / 64` at position `k % 64`.
    #[inline]
    pub fn words(&self, x: usize, y: usize) -> &[u64] {
        let start = (y * self.width + x) * self.words;
        &self.bits[start..start + self.words]
    }

    pub fn bit(&self, x: usize, y: usize, k: usize) -> bool {
        self.words(x, y)[k / 64] >> (k % 64) & 1 == 1
    }

    /// Unpacked descriptor, `None` where undefined.
    pub fn bit_string(&self, x: usize, y: usize) -> Option<Vec<bool>> {
        self.is_defined(x, y)
            .then(|| (0..self.string_len()).map(|k| self.bit(x, y, k)).collect())
    }
}

pub fn string_len(radius: usize) -> usize {
    let side = 2 * radius + 1;
    side * side - 1
}

#[inline]
pub fn hamming(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

pub fn census_transform(img: &GrayImage, radius: usize) -> Result<CensusGrid> {
    if radius == 0 {
        return Err(Error::Param("census radius must be at least 1".into()));
    }
    let side = 2 * radius + 1;
    let (width, height) = (img.width(), img.height());
    if width < side || height < side {
        return Err(dim_err(format!(
            "{width}x{height} image is smaller than the {side}x{side} census window"
        )));
    }
    let nbits = string_len(radius);
    let words = nbits.div_ceil(64);
    let mut bits = vec![0u64; width * height * words];
    let mut defined = vec![false; width * height];
    let r = radius;

    bits.par_chunks_mut(width * words)
        .zip(defined.par_chunks_mut(width))
        .enumerate()
        .for_each(|(y, (row_bits, row_defined))| {
            if y < r || y + r >= height {
                return;
            }
            for x in r..width - r {
                let center = img.get(x, y);
                let out = &mut row_bits[x * words..(x + 1) * words];
                let mut k = 0;
                for qy in y - r..=y + r {
                    let row = img.row(qy);
                    for (qx, &q) in row.iter().enumerate().take(x + r + 1).skip(x - r) {
                        if qy == y && qx == x {
                            continue;
                        }
                        if center > q {
                            out[k / 64] |= 1 << (k % 64);
                        }
                        k += 1;
                    }
                }
                row_defined[x] = true;
            }
        });

    Ok(CensusGrid {
        width,
        height,
        radius,
        words,
        bits,
        defined,
    })
}

/// `cost(p, d) = popcount(S_left(p) ^ S_right(p - d))`. Infeasible or undefined
/// pairs get the descriptor length as border cost.
pub fn census_cost_volume(
    left: &CensusGrid,
    right: &CensusGrid,
    d_max: usize,
) -> Result<CostVolume> {
    if left.width != right.width || left.height != right.height || left.radius != right.radius {
        return Err(dim_err(format!(
            "census grids differ: {}x{} r{} vs {}x{} r{}",
            left.width, left.height, left.radius, right.width, right.height, right.radius
        )));
    }
    let (width, height) = (left.width, left.height);
    let depth = d_max + 1;
    let border = left.string_len() as f32;
    let mut costs = vec![border; width * height * depth];

    costs
        .par_chunks_mut(width * depth)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..width {
                if !left.is_defined(x, y) {
                    continue;
                }
                let s_left = left.words(x, y);
                let cell = &mut row[x * depth..(x + 1) * depth];
                for (d, c) in cell.iter_mut().enumerate().take(x.min(d_max) + 1) {
                    let xr = x - d;
                    if right.is_defined(xr, y) {
                        *c = hamming(s_left, right.words(xr, y)) as f32;
                    }
                }
            }
        });

    Ok(CostVolume::from_raw(width, height, d_max, border, costs))
}
