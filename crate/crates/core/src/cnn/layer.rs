use super::scalar::{gemm, MatRef, Scalar};
use crate::error::{Error, Result};

pub const KERNEL_SIZE: usize = 3;
const TAPS: usize = KERNEL_SIZE * KERNEL_SIZE;

/// 3×3 valid convolution. Weights are laid out `[out][in][ky][kx]`, which is
/// also the row-major `out × (in·9)` matrix used by the GEMM.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer<T: Scalar = f32> {
    out_channels: usize,
    in_channels: usize,
    weights: Vec<T>,
    bias: Vec<T>,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn new(
        out_channels: usize,
        in_channels: usize,
        weights: Vec<T>,
        bias: Vec<T>,
    ) -> Result<Self> {
        if out_channels == 0 || in_channels == 0 {
            return Err(Error::Param("layer needs at least one channel".into()));
        }
        if weights.len() != out_channels * in_channels * TAPS {
            return Err(Error::Param(format!(
                "{} weights for a {}x{}x3x3 kernel",
                weights.len(),
                out_channels,
                in_channels
            )));
        }
        if bias.len() != out_channels {
            return Err(Error::Param(format!(
                "{} biases for {} output channels",
                bias.len(),
                out_channels
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::Param("non-finite layer parameter".into()));
        }
        Ok(Self {
            out_channels,
            in_channels,
            weights,
            bias,
        })
    }

    pub fn zeros(out_channels: usize, in_channels: usize) -> Self {
        Self {
            out_channels,
            in_channels,
            weights: vec![T::zero(); out_channels * in_channels * TAPS],
            bias: vec![T::zero(); out_channels],
        }
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn bias(&self) -> &[T] {
        &self.bias
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [T] {
        &mut self.weights
    }

    pub(crate) fn bias_mut(&mut self) -> &mut [T] {
        &mut self.bias
    }

    pub fn cast<U: Scalar>(&self) -> ConvLayer<U> {
        ConvLayer {
            out_channels: self.out_channels,
            in_channels: self.in_channels,
            weights: self.weights.iter().map(|&v| cast(v)).collect(),
            bias: self.bias.iter().map(|&v| cast(v)).collect(),
        }
    }

    fn patch_len(&self) -> usize {
        self.in_channels * TAPS
    }

    /// Unfolds a `[in][batch][h][w]` tensor into the `(in·9) × (batch·ho·wo)`
    /// matrix whose columns are the receptive fields of each output pixel.
    pub(crate) fn im2col(&self, input: &[T], shape: Shape) -> Vec<T> {
        let Shape { batch, h, w } = shape;
        debug_assert_eq!(input.len(), self.in_channels * batch * h * w);
        let (ho, wo) = (h - 2, w - 2);
        let n = batch * ho * wo;
        let mut cols = vec![T::zero(); self.patch_len() * n];
        for i in 0..self.in_channels {
            for ky in 0..KERNEL_SIZE {
                for kx in 0..KERNEL_SIZE {
                    let row = i * TAPS + ky * KERNEL_SIZE + kx;
                    let dst = &mut cols[row * n..(row + 1) * n];
                    for b in 0..batch {
                        let plane = (i * batch + b) * h * w;
                        for oy in 0..ho {
                            let src = plane + (oy + ky) * w + kx;
                            let out = (b * ho + oy) * wo;
                            dst[out..out + wo].copy_from_slice(&input[src..src + wo]);
                        }
                    }
                }
            }
        }
        cols
    }

    /// Pre-activation output `[out][batch][h-2][w-2]` from unfolded input.
    pub(crate) fn forward_cols(&self, cols: &[T], shape: Shape) -> Vec<T> {
        let n = shape.batch * (shape.h - 2) * (shape.w - 2);
        let mut out = vec![T::zero(); self.out_channels * n];
        gemm(
            T::one(),
            MatRef::row_major(&self.weights, self.out_channels, self.patch_len()),
            MatRef::row_major(cols, self.patch_len(), n),
            T::zero(),
            &mut out,
        );
        for (row, &b) in out.chunks_exact_mut(n.max(1)).zip(&self.bias) {
            row.iter_mut().for_each(|v| *v = *v + b);
        }
        out
    }

    /// Accumulates parameter gradients into `grad` and, when asked, returns
    /// the gradient with respect to the layer input.
    pub(crate) fn backward(
        &self,
        cols: &[T],
        grad_out: &[T],
        shape: Shape,
        grad: &mut ConvLayer<T>,
        want_input_grad: bool,
    ) -> Option<Vec<T>> {
        let Shape { batch, h, w } = shape;
        let (ho, wo) = (h - 2, w - 2);
        let n = batch * ho * wo;
        let k = self.patch_len();
        gemm(
            T::one(),
            MatRef::row_major(grad_out, self.out_channels, n),
            MatRef::row_major(cols, k, n).t(),
            T::one(),
            &mut grad.weights,
        );
        for (row, db) in grad_out.chunks_exact(n).zip(grad.bias.iter_mut()) {
            *db = *db + row.iter().copied().sum::<T>();
        }
        if !want_input_grad {
            return None;
        }
        let mut dcols = vec![T::zero(); k * n];
        gemm(
            T::one(),
            MatRef::row_major(&self.weights, self.out_channels, k).t(),
            MatRef::row_major(grad_out, self.out_channels, n),
            T::zero(),
            &mut dcols,
        );
        let mut dinput = vec![T::zero(); self.in_channels * batch * h * w];
        for i in 0..self.in_channels {
            for ky in 0..KERNEL_SIZE {
                for kx in 0..KERNEL_SIZE {
                    let row = i * TAPS + ky * KERNEL_SIZE + kx;
                    let src_row = &dcols[row * n..(row + 1) * n];
                    for b in 0..batch {
                        let plane = (i * batch + b) * h * w;
                        for oy in 0..ho {
                            let dst = plane + (oy + ky) * w + kx;
                            let src = (b * ho + oy) * wo;
                            for (d, &s) in dinput[dst..dst + wo]
                                .iter_mut()
                                .zip(&src_row[src..src + wo])
                            {
                                *d = *d + s;
                            }
                        }
                    }
                }
            }
        }
        Some(dinput)
    }

    pub(crate) fn add_scaled(&mut self, other: &ConvLayer<T>, scale: T) {
        for (a, &b) in self.weights.iter_mut().zip(&other.weights) {
            *a = *a + scale * b;
        }
        for (a, &b) in self.bias.iter_mut().zip(&other.bias) {
            *a = *a + scale * b;
        }
    }
}

/// Batch size and spatial extent of a `[channels][batch][h][w]` tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Shape {
    pub batch: usize,
    pub h: usize,
    pub w: usize,
}

impl Shape {
    pub fn shrink(self) -> Self {
        Self {
            batch: self.batch,
            h: self.h - 2,
            w: self.w - 2,
        }
    }
}

#[inline]
pub(crate) fn cast<A: Scalar, B: Scalar>(v: A) -> B {
    B::from(v).unwrap_or_else(B::nan)
}
