use rayon::prelude::*;

use super::layer::Shape;
use super::network::{normalize, FeatureNetwork, FEATURE_MARGIN, RECEPTIVE_FIELD};
use super::scalar::Scalar;
use crate::error::{dim_err, Error, Result};
use crate::image_io::{CostVolume, GrayImage};

/// Output rows computed per strip during full-image inference.
const STRIP_ROWS: usize = 16;

/// Border cost of the feature metric; the worst possible `-cos`.
pub const CNN_BORDER_COST: f32 = 1.0;

/// Per-pixel feature vectors, each of unit length or exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    width: usize,
    height: usize,
    dim: usize,
    vectors: Vec<f32>,
    nonzero: Vec<bool>,
}

impl FeatureGrid {
    /// Validates the unit-or-zero norm contract (tolerance 1e-6).
    pub fn new(width: usize, height: usize, dim: usize, vectors: Vec<f32>) -> Result<Self> {
        if dim == 0 || vectors.len() != width * height * dim {
            return Err(dim_err(format!(
                "{} feature values for {}x{}x{}",
                vectors.len(),
                width,
                height,
                dim
            )));
        }
        let mut nonzero = Vec::with_capacity(width * height);
        for (i, v) in vectors.chunks_exact(dim).enumerate() {
            let zero = v.iter().all(|&c| c == 0.0);
            let norm = v
                .iter()
                .map(|&c| f64::from(c) * f64::from(c))
                .sum::<f64>()
                .sqrt();
            if !zero && (norm - 1.0).abs() > 1e-6 {
                return Err(Error::Data(format!("feature {i} has norm {norm}")));
            }
            nonzero.push(!zero);
        }
        Ok(Self {
            width,
            height,
            dim,
            vectors,
            nonzero,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn vector(&self, x: usize, y: usize) -> &[f32] {
        let start = (y * self.width + x) * self.dim;
        &self.vectors[start..start + self.dim]
    }

    #[inline]
    pub fn is_zero(&self, x: usize, y: usize) -> bool {
        !self.nonzero[y * self.width + x]
    }
}

/// Runs the network over every pixel whose receptive field fits in the image.
/// Pixels within `FEATURE_MARGIN` of an edge get the zero vector.
pub fn forward_features<T: Scalar>(
    net: &FeatureNetwork<T>,
    img: &GrayImage,
) -> Result<FeatureGrid> {
    let (width, height) = (img.width(), img.height());
    if width < RECEPTIVE_FIELD || height < RECEPTIVE_FIELD {
        return Err(dim_err(format!(
            "{width}x{height} image is smaller than the {RECEPTIVE_FIELD}x{RECEPTIVE_FIELD} receptive field"
        )));
    }
    let dim = net.feature_dim();
    let out_h = height - 2 * FEATURE_MARGIN;
    let out_w = width - 2 * FEATURE_MARGIN;
    let strips: Vec<usize> = (0..out_h).step_by(STRIP_ROWS).collect();

    let results: Vec<(usize, usize, Vec<T>)> = strips
        .par_iter()
        .map(|&y0| {
            let rows = STRIP_ROWS.min(out_h - y0);
            let in_rows = rows + 2 * FEATURE_MARGIN;
            let input: Vec<T> = img.data()[y0 * width..(y0 + in_rows) * width]
                .iter()
                .map(|&v| T::from_f32(v))
                .collect();
            let out = net.forward(
                &input,
                Shape {
                    batch: 1,
                    h: in_rows,
                    w: width,
                },
            );
            (y0, rows, out)
        })
        .collect();

    let mut vectors = vec![0.0f32; width * height * dim];
    let mut nonzero = vec![false; width * height];
    let mut buf = vec![T::zero(); dim];
    for (y0, rows, out) in results {
        let plane = rows * out_w;
        for oy in 0..rows {
            for ox in 0..out_w {
                for (c, slot) in buf.iter_mut().enumerate() {
                    *slot = out[c * plane + oy * out_w + ox];
                }
                normalize(&mut buf);
                let (x, y) = (ox + FEATURE_MARGIN, y0 + oy + FEATURE_MARGIN);
                let idx = y * width + x;
                let dst = &mut vectors[idx * dim..(idx + 1) * dim];
                for (d, &s) in dst.iter_mut().zip(&buf) {
                    *d = s.to_f32();
                }
                nonzero[idx] = buf.iter().any(|&v| v != T::zero());
            }
        }
    }
    Ok(FeatureGrid {
        width,
        height,
        dim,
        vectors,
        nonzero,
    })
}

/// `cost(p, d) = -<fL(p), fR(p - d)>`, clamped to `[-1, 1]`. Infeasible pairs
/// and pairs involving a zero feature get `CNN_BORDER_COST`.
pub fn cnn_cost_volume(
    left: &FeatureGrid,
    right: &FeatureGrid,
    d_max: usize,
) -> Result<CostVolume> {
    if left.width != right.width || left.height != right.height || left.dim != right.dim {
        return Err(dim_err(format!(
            "feature grids differ: {}x{}x{} vs {}x{}x{}",
            left.width, left.height, left.dim, right.width, right.height, right.dim
        )));
    }
    let (width, height) = (left.width, left.height);
    let depth = d_max + 1;
    let mut costs = vec![CNN_BORDER_COST; width * height * depth];
    costs
        .par_chunks_mut(width * depth)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..width {
                if left.is_zero(x, y) {
                    continue;
                }
                let fl = left.vector(x, y);
                let cell = &mut row[x * depth..(x + 1) * depth];
                for (d, c) in cell.iter_mut().enumerate().take(x.min(d_max) + 1) {
                    if right.is_zero(x - d, y) {
                        continue;
                    }
                    let dot: f32 = fl
                        .iter()
                        .zip(right.vector(x - d, y))
                        .map(|(a, b)| a * b)
                        .sum();
                    *c = (-dot).clamp(-1.0, 1.0);
                }
            }
        });
    Ok(CostVolume::from_raw(
        width,
        height,
        d_max,
        CNN_BORDER_COST,
        costs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_zero_features() {
        let net = FeatureNetwork::<f32>::zeros([4, 4, 4, 4]);
        let img = GrayImage::from_fn(12, 11, |x, y| ((x * 7 + y * 3) % 10) as f32 / 10.0);
        let grid = forward_features(&net, &img).unwrap();
        assert!((0..11).all(|y| (0..12).all(|x| grid.is_zero(x, y))));
        let cv = cnn_cost_volume(&grid, &grid, 2).unwrap();
        assert!(cv.costs().iter().all(|&c| c == CNN_BORDER_COST));
    }

    #[test]
    fn too_small_image() {
        let net = FeatureNetwork::<f32>::zeros([2, 2, 2, 2]);
        let img = GrayImage::from_fn(8, 30, |_, _| 0.0);
        assert!(matches!(
            forward_features(&net, &img),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn orthogonal_features_cost_zero() {
        let left = FeatureGrid::new(2, 1, 2, vec![0.0, 0.0, 1.0, 0.0]).unwrap();
        let right = FeatureGrid::new(2, 1, 2, vec![0.0, 1.0, 0.0, 1.0]).unwrap();
        let cv = cnn_cost_volume(&left, &right, 1).unwrap();
        assert_eq!(cv.get(1, 0, 1), 0.0);
        assert_eq!(cv.get(1, 0, 0), 0.0);
        // left(0) is the zero vector
        assert_eq!(cv.get(0, 0, 0), CNN_BORDER_COST);
    }

    #[test]
    fn grid_rejects_non_unit_vectors() {
        assert!(FeatureGrid::new(1, 1, 2, vec![0.5, 0.5]).is_err());
        assert!(FeatureGrid::new(1, 1, 2, vec![0.6, 0.8]).is_ok());
        assert!(FeatureGrid::new(1, 1, 2, vec![0.6]).is_err());
    }

    #[test]
    fn mismatched_dims() {
        let a = FeatureGrid::new(1, 1, 2, vec![1.0, 0.0]).unwrap();
        let b = FeatureGrid::new(1, 1, 1, vec![1.0]).unwrap();
        assert!(matches!(
            cnn_cost_volume(&a, &b, 0),
            Err(Error::Dimension(_))
        ));
    }
}
