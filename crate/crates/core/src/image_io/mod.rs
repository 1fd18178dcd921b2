//! Raster types shared by every stage of the pipeline, plus the PGM and PFM
//! codecs used to move them on and off disk.
//!
//! Intensities live in `[0, 1]` as `f32` no matter how they were stored.
//! Disparities are `f32` with invalid pixels held as `None`; on disk an
//! invalid pixel is written as negative infinity.

mod pfm;
mod pgm;
mod volume;

pub use pfm::{decode_pfm, encode_pfm, load_pfm, save_pfm};
pub use pgm::{decode_pgm, encode_pgm, load_pgm, save_pgm};
pub use volume::CostVolume;

use crate::error::{dim_err, Error, Result};

/// Single-band intensity raster, row-major, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height {
            return Err(dim_err(format!(
                "image data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        if let Some(i) = data.iter().position(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::Data(format!(
                "intensity {} at index {} outside [0, 1]",
                data[i], i
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Builds an image by evaluating `f(x, y)`; results are clamped into `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(clamp_unit(f(x, y)));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_bytes(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != width * height {
            return Err(dim_err(format!(
                "{} bytes for a {}x{} image",
                bytes.len(),
                width,
                height
            )));
        }
        let data = bytes.iter().map(|&b| f32::from(b) / 255.0).collect();
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f32] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    /// Applies `f` to every intensity. Fails if `f` leaves `[0, 1]`.
    pub fn map(&self, f: impl Fn(f32) -> f32) -> Result<Self> {
        Self::new(
            self.width,
            self.height,
            self.data.iter().map(|&v| f(v)).collect(),
        )
    }

    /// Nearest 8-bit quantization of every intensity.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.data
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }
}

#[inline]
pub(crate) fn clamp_unit(v: f32) -> f32 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Per-pixel disparity in pixels. `None` marks an invalid pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    data: Vec<Option<f32>>,
}

impl DisparityMap {
    pub fn new(width: usize, height: usize, data: Vec<Option<f32>>) -> Result<Self> {
        if data.len() != width * height {
            return Err(dim_err(format!(
                "disparity data has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        for (i, v) in data.iter().enumerate() {
            if let Some(d) = *v {
                if !d.is_finite() || d < 0.0 {
                    return Err(Error::Data(format!("disparity {d} at index {i}")));
                }
            }
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: Option<f32>) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<Option<f32>>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        Self {
            width,
            height,
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[Option<f32>] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        self.data[y * self.width + x]
    }

    pub fn count_valid(&self) -> usize {
        self.data.iter().filter(|v| v.is_some()).count()
    }

    pub fn count_invalid(&self) -> usize {
        self.data.len() - self.count_valid()
    }

    /// Checks every valid disparity lies in `[0, d_max]`.
    pub fn check_range(&self, d_max: usize) -> Result<()> {
        let limit = d_max as f32;
        match self.data.iter().flatten().find(|&&d| d > limit) {
            Some(d) => Err(Error::Data(format!("disparity {d} exceeds d_max {d_max}"))),
            None => Ok(()),
        }
    }

    pub fn same_shape(&self, other: &DisparityMap) -> bool {
        self.width == other.width && self.height == other.height
    }
}
