use super::layer::Shape;
use super::network::{normalize, FeatureNetwork, PATCH_LEN, RECEPTIVE_FIELD};
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Reference patch from the left image, the matching patch from the right
/// image at the true disparity, and a non-matching right patch.
#[derive(Debug, Clone, PartialEq)]
pub struct PatchTriple {
    pub reference: [f32; PATCH_LEN],
    pub positive: [f32; PATCH_LEN],
    pub negative: [f32; PATCH_LEN],
}

impl PatchTriple {
    pub fn new(reference: &[f32], positive: &[f32], negative: &[f32]) -> Result<Self> {
        let grab = |p: &[f32]| -> Result<[f32; PATCH_LEN]> {
            p.try_into().map_err(|_| {
                Error::Dimension(format!(
                    "patch has {} values, expected {RECEPTIVE_FIELD}x{RECEPTIVE_FIELD}",
                    p.len()
                ))
            })
        };
        Ok(Self {
            reference: grab(reference)?,
            positive: grab(positive)?,
            negative: grab(negative)?,
        })
    }
}

/// `max(0, margin + s_neg - s_pos)`. NaN passes through.
#[inline]
pub fn hinge<T: Scalar>(s_pos: T, s_neg: T, margin: T) -> T {
    let v = margin + s_neg - s_pos;
    if v < T::zero() {
        T::zero()
    } else {
        v
    }
}

/// Similarities and loss for one triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TripleLoss<T> {
    pub s_pos: T,
    pub s_neg: T,
    pub loss: T,
}

/// Hinge loss of one triple and its gradient over every network parameter.
/// The gradient is exactly zero when the hinge is inactive.
pub fn hinge_loss<T: Scalar>(
    net: &FeatureNetwork<T>,
    triple: &PatchTriple,
    margin: T,
) -> Result<(TripleLoss<T>, FeatureNetwork<T>)> {
    check_margin(margin)?;
    let mut grad = net.zeros_like();
    let losses = batch_hinge(net, std::slice::from_ref(triple), margin, Some(&mut grad));
    Ok((losses[0], grad))
}

pub(crate) fn check_margin<T: Scalar>(margin: T) -> Result<()> {
    if margin > T::zero() && margin.is_finite() {
        Ok(())
    } else {
        Err(Error::Param(format!(
            "margin must be positive, got {margin:?}"
        )))
    }
}

/// Forward (and optionally backward) over a batch of triples in one pass.
/// Gradients of the summed loss are added into `grad`.
pub(crate) fn batch_hinge<T: Scalar>(
    net: &FeatureNetwork<T>,
    triples: &[PatchTriple],
    margin: T,
    grad: Option<&mut FeatureNetwork<T>>,
) -> Vec<TripleLoss<T>> {
    let b = triples.len();
    let patches = 3 * b;
    let mut input = Vec::with_capacity(patches * PATCH_LEN);
    for t in triples {
        input.extend(t.reference.iter().map(|&v| T::from_f32(v)));
    }
    for t in triples {
        input.extend(t.positive.iter().map(|&v| T::from_f32(v)));
    }
    for t in triples {
        input.extend(t.negative.iter().map(|&v| T::from_f32(v)));
    }
    let shape = Shape {
        batch: patches,
        h: RECEPTIVE_FIELD,
        w: RECEPTIVE_FIELD,
    };
    let dim = net.feature_dim();
    let (out, trace) = if grad.is_some() {
        let (o, t) = net.forward_traced(&input, shape);
        (o, Some(t))
    } else {
        (net.forward(&input, shape), None)
    };

    // out is [dim][patches]; regroup per patch and normalize
    let mut units = vec![T::zero(); patches * dim];
    let mut norms = vec![T::zero(); patches];
    for j in 0..patches {
        let u = &mut units[j * dim..(j + 1) * dim];
        for (c, slot) in u.iter_mut().enumerate() {
            *slot = out[c * patches + j];
        }
        norms[j] = normalize(u);
    }
    let unit = |j: usize| &units[j * dim..(j + 1) * dim];
    let dot = |a: &[T], c: &[T]| a.iter().zip(c).map(|(&x, &y)| x * y).sum::<T>();

    let losses: Vec<TripleLoss<T>> = (0..b)
        .map(|i| {
            let s_pos = dot(unit(i), unit(b + i));
            let s_neg = dot(unit(i), unit(2 * b + i));
            TripleLoss {
                s_pos,
                s_neg,
                loss: hinge(s_pos, s_neg, margin),
            }
        })
        .collect();

    if let (Some(grad), Some(trace)) = (grad, trace) {
        if losses.iter().all(|l| l.loss <= T::zero()) {
            return losses;
        }
        let mut grad_units = vec![T::zero(); patches * dim];
        for (i, l) in losses.iter().enumerate() {
            if l.loss <= T::zero() {
                continue;
            }
            for c in 0..dim {
                let (r, p, n) = (unit(i)[c], unit(b + i)[c], unit(2 * b + i)[c]);
                grad_units[i * dim + c] = n - p;
                grad_units[(b + i) * dim + c] = -r;
                grad_units[(2 * b + i) * dim + c] = r;
            }
        }
        // through u = f / |f|: df = (du - u (u . du)) / |f|
        let mut grad_out = vec![T::zero(); dim * patches];
        for j in 0..patches {
            let norm = norms[j];
            if norm.to_f64() < super::network::MIN_FEATURE_NORM {
                continue;
            }
            let u = unit(j);
            let gu = &grad_units[j * dim..(j + 1) * dim];
            let proj = dot(u, gu);
            for c in 0..dim {
                grad_out[c * patches + j] = (gu[c] - u[c] * proj) / norm;
            }
        }
        net.backward(&trace, grad_out, grad);
    }
    losses
}
