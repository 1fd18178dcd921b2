use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::layer::{ConvLayer, Shape};
use super::scalar::Scalar;
use crate::error::{Error, Result};

pub const NUM_LAYERS: usize = 4;
/// Side of the square patch one output feature depends on.
pub const RECEPTIVE_FIELD: usize = 2 * NUM_LAYERS + 1;
/// Pixels lost on each side of an image by the valid convolutions.
pub const FEATURE_MARGIN: usize = NUM_LAYERS;
pub const PATCH_LEN: usize = RECEPTIVE_FIELD * RECEPTIVE_FIELD;
pub const DEFAULT_WIDTHS: [usize; NUM_LAYERS] = [64, 64, 64, 64];

/// Feature extractor shared by both siamese branches: four 3×3 valid
/// convolutions, ReLU after the first three, linear output.
///
/// The same type doubles as the gradient accumulator during training.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureNetwork<T: Scalar = f32> {
    layers: Vec<ConvLayer<T>>,
}

impl<T: Scalar> FeatureNetwork<T> {
    pub fn new(layers: Vec<ConvLayer<T>>) -> Result<Self> {
        if layers.len() != NUM_LAYERS {
            return Err(Error::Param(format!(
                "network needs exactly {NUM_LAYERS} layers, got {}",
                layers.len()
            )));
        }
        if layers[0].in_channels() != 1 {
            return Err(Error::Param(format!(
                "first layer takes {} channels, expected 1",
                layers[0].in_channels()
            )));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[1].in_channels() != pair[0].out_channels() {
                return Err(Error::Param(format!(
                    "layer {} expects {} input channels but layer {} emits {}",
                    k + 2,
                    pair[1].in_channels(),
                    k + 1,
                    pair[0].out_channels()
                )));
            }
        }
        Ok(Self { layers })
    }

    /// He-normal weights, zero biases.
    pub fn random(widths: [usize; NUM_LAYERS], seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut in_channels = 1;
        let layers = widths
            .iter()
            .map(|&out| {
                let fan_in = (in_channels * 9) as f64;
                let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
                let weights = (0..out * in_channels * 9)
                    .map(|_| T::from(normal.sample(&mut rng)).unwrap_or_else(T::zero))
                    .collect();
                let layer = ConvLayer::new(out, in_channels, weights, vec![T::zero(); out])
                    .expect("shapes are consistent by construction");
                in_channels = out;
                layer
            })
            .collect();
        Self { layers }
    }

    pub fn zeros(widths: [usize; NUM_LAYERS]) -> Self {
        let mut in_channels = 1;
        let layers = widths
            .iter()
            .map(|&out| {
                let layer = ConvLayer::zeros(out, in_channels);
                in_channels = out;
                layer
            })
            .collect();
        Self { layers }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| ConvLayer::zeros(l.out_channels(), l.in_channels()))
                .collect(),
        }
    }

    pub fn layers(&self) -> &[ConvLayer<T>] {
        &self.layers
    }

    pub fn widths(&self) -> [usize; NUM_LAYERS] {
        let mut w = [0; NUM_LAYERS];
        for (slot, l) in w.iter_mut().zip(&self.layers) {
            *slot = l.out_channels();
        }
        w
    }

    pub fn feature_dim(&self) -> usize {
        self.layers[NUM_LAYERS - 1].out_channels()
    }

    pub fn cast<U: Scalar>(&self) -> FeatureNetwork<U> {
        FeatureNetwork {
            layers: self.layers.iter().map(ConvLayer::cast).collect(),
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights().len() + l.bias().len())
            .sum()
    }

    /// All parameters flattened layer by layer, weights before biases.
    pub fn parameters(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.num_parameters());
        for l in &self.layers {
            out.extend_from_slice(l.weights());
            out.extend_from_slice(l.bias());
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[T]) -> Result<()> {
        if params.len() != self.num_parameters() {
            return Err(Error::Param(format!(
                "{} parameters for a network with {}",
                params.len(),
                self.num_parameters()
            )));
        }
        let mut rest = params;
        for l in &mut self.layers {
            let (w, tail) = rest.split_at(l.weights().len());
            l.weights_mut().copy_from_slice(w);
            let (b, tail) = tail.split_at(l.bias().len());
            l.bias_mut().copy_from_slice(b);
            rest = tail;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights().iter().chain(l.bias()).all(|v| v.is_finite()))
    }

    /// `self += scale * other`; shapes must match.
    pub fn add_scaled(&mut self, other: &FeatureNetwork<T>, scale: T) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.add_scaled(b, scale);
        }
    }

    /// Raw (unnormalized) output for a `[1][batch][h][w]` input; the result is
    /// `[dim][batch][h-8][w-8]`.
    pub(crate) fn forward(&self, input: &[T], shape: Shape) -> Vec<T> {
        let mut act = input.to_vec();
        let mut shape = shape;
        for (k, layer) in self.layers.iter().enumerate() {
            let cols = layer.im2col(&act, shape);
            act = layer.forward_cols(&cols, shape);
            if k + 1 < NUM_LAYERS {
                relu(&mut act);
            }
            shape = shape.shrink();
        }
        act
    }

    pub(crate) fn forward_traced(&self, input: &[T], shape: Shape) -> (Vec<T>, Trace<T>) {
        let mut trace = Trace {
            cols: Vec::with_capacity(NUM_LAYERS),
            shapes: Vec::with_capacity(NUM_LAYERS),
            activations: Vec::with_capacity(NUM_LAYERS - 1),
        };
        let mut act = input.to_vec();
        let mut shape = shape;
        for (k, layer) in self.layers.iter().enumerate() {
            let cols = layer.im2col(&act, shape);
            act = layer.forward_cols(&cols, shape);
            trace.cols.push(cols);
            trace.shapes.push(shape);
            if k + 1 < NUM_LAYERS {
                relu(&mut act);
                trace.activations.push(act.clone());
            }
            shape = shape.shrink();
        }
        (act, trace)
    }

    /// Backpropagates `grad_out` (same layout as the forward output) and adds
    /// the parameter gradients into `grad`.
    pub(crate) fn backward(
        &self,
        trace: &Trace<T>,
        grad_out: Vec<T>,
        grad: &mut FeatureNetwork<T>,
    ) {
        let mut g = grad_out;
        for k in (0..NUM_LAYERS).rev() {
            if k + 1 < NUM_LAYERS {
                for (gv, &a) in g.iter_mut().zip(&trace.activations[k]) {
                    if a <= T::zero() {
                        *gv = T::zero();
                    }
                }
            }
            let next = self.layers[k].backward(
                &trace.cols[k],
                &g,
                trace.shapes[k],
                &mut grad.layers[k],
                k > 0,
            );
            match next {
                Some(n) => g = n,
                None => break,
            }
        }
    }

    /// Unit-normalized feature of a single receptive-field patch (row-major,
    /// `RECEPTIVE_FIELD²` intensities). Zero if the raw feature vanishes.
    pub fn patch_feature(&self, patch: &[f32]) -> Result<Vec<T>> {
        if patch.len() != PATCH_LEN {
            return Err(Error::Dimension(format!(
                "patch has {} values, expected {PATCH_LEN}",
                patch.len()
            )));
        }
        let input: Vec<T> = patch.iter().map(|&v| T::from_f32(v)).collect();
        let mut f = self.forward(
            &input,
            Shape {
                batch: 1,
                h: RECEPTIVE_FIELD,
                w: RECEPTIVE_FIELD,
            },
        );
        normalize(&mut f);
        Ok(f)
    }
}

impl FeatureNetwork<f64> {
    pub fn to_f32(&self) -> FeatureNetwork<f32> {
        self.cast()
    }
}

pub(crate) struct Trace<T> {
    cols: Vec<Vec<T>>,
    shapes: Vec<Shape>,
    activations: Vec<Vec<T>>,
}

fn relu<T: Scalar>(v: &mut [T]) {
    for x in v {
        if *x < T::zero() {
            *x = T::zero();
        }
    }
}

/// Below this norm a raw feature is treated as absent.
pub const MIN_FEATURE_NORM: f64 = 1e-12;

/// Scales `v` to unit length in place and returns the original norm; vectors
/// with norm under `MIN_FEATURE_NORM` are zeroed.
pub(crate) fn normalize<T: Scalar>(v: &mut [T]) -> T {
    let norm = v.iter().map(|&x| x * x).sum::<T>().sqrt();
    if norm.to_f64() < MIN_FEATURE_NORM {
        v.iter_mut().for_each(|x| *x = T::zero());
    } else {
        v.iter_mut().for_each(|x| *x = *x / norm);
    }
    norm
}
