//! Slow, loop-level reference implementations used as test oracles.
#![allow(dead_code)]

use stereocost::cnn::{FeatureNetwork, PatchTriple, KERNEL_SIZE, RECEPTIVE_FIELD};
use stereocost::image_io::GrayImage;

/// Census bit string of `(x, y)` by direct comparison, or `None` near the border.
pub fn census_bits(img: &GrayImage, radius: usize, x: usize, y: usize) -> Option<Vec<bool>> {
    let (w, h) = (img.width(), img.height());
    if x < radius || y < radius || x + radius >= w || y + radius >= h {
        return None;
    }
    let c = img.get(x, y);
    let mut bits = Vec::new();
    for qy in y - radius..=y + radius {
        for qx in x - radius..=x + radius {
            if (qx, qy) != (x, y) {
                bits.push(c > img.get(qx, qy));
            }
        }
    }
    Some(bits)
}

/// Census cost by per-bit comparison.
pub fn census_cost(
    left: &GrayImage,
    right: &GrayImage,
    radius: usize,
    x: usize,
    y: usize,
    d: usize,
) -> f32 {
    let len = (2 * radius + 1).pow(2) - 1;
    if d > x {
        return len as f32;
    }
    match (
        census_bits(left, radius, x, y),
        census_bits(right, radius, x - d, y),
    ) {
        (Some(a), Some(b)) => a.iter().zip(&b).filter(|(p, q)| p != q).count() as f32,
        _ => len as f32,
    }
}

/// Raw network output for one square patch, plus the sign pattern of every
/// hidden pre-activation (true where the ReLU passes).
pub fn net_forward(net: &FeatureNetwork<f64>, patch: &[f64], size: usize) -> (Vec<f64>, Vec<bool>) {
    let mut act = vec![patch.to_vec()];
    let mut side = size;
    let mut pattern = Vec::new();
    for (k, layer) in net.layers().iter().enumerate() {
        let (cin, cout) = (layer.in_channels(), layer.out_channels());
        let out_side = side - (KERNEL_SIZE - 1);
        let mut next = vec![vec![0.0; out_side * out_side]; cout];
        for (o, plane) in next.iter_mut().enumerate() {
            for oy in 0..out_side {
                for ox in 0..out_side {
                    let mut s = layer.bias()[o];
                    for (i, input) in act.iter().enumerate().take(cin) {
                        for ky in 0..KERNEL_SIZE {
                            for kx in 0..KERNEL_SIZE {
                                let wi = ((o * cin + i) * KERNEL_SIZE + ky) * KERNEL_SIZE + kx;
                                s += layer.weights()[wi] * input[(oy + ky) * side + ox + kx];
                            }
                        }
                    }
                    if k + 1 < net.layers().len() {
                        pattern.push(s > 0.0);
                        s = s.max(0.0);
                    }
                    plane[oy * out_side + ox] = s;
                }
            }
        }
        act = next;
        side = out_side;
    }
    (act.into_iter().flatten().collect(), pattern)
}

pub fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n < 1e-12 {
        vec![0.0; v.len()]
    } else {
        v.iter().map(|x| x / n).collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Hinge loss of one triple and the ReLU pattern of all three branches.
pub fn triple_loss(net: &FeatureNetwork<f64>, t: &PatchTriple, margin: f64) -> (f64, Vec<bool>) {
    let branch = |p: &[f32]| {
        let p: Vec<f64> = p.iter().map(|&v| f64::from(v)).collect();
        net_forward(net, &p, RECEPTIVE_FIELD)
    };
    let (r, mut pat) = branch(&t.reference);
    let (p, pp) = branch(&t.positive);
    let (n, pn) = branch(&t.negative);
    pat.extend(pp);
    pat.extend(pn);
    let (r, p, n) = (unit(&r), unit(&p), unit(&n));
    let v = margin + dot(&r, &n) - dot(&r, &p);
    // the hinge is a kink too
    pat.push(v > 0.0);
    (v.max(0.0), pat)
}

/// Minimum over every disparity sequence ending in `d` at column `x` of the
/// summed costs plus transition penalties.
pub fn viterbi_enumerate(costs: &[Vec<f64>], p1: f64, p2: f64, x: usize, d: usize) -> f64 {
    let depth = costs[0].len();
    let len = x + 1;
    let mut best = f64::INFINITY;
    let total = depth.pow(len as u32 - 1);
    for code in 0..total {
        let mut seq = Vec::with_capacity(len);
        let mut c = code;
        for _ in 0..len - 1 {
            seq.push(c % depth);
            c /= depth;
        }
        seq.push(d);
        let mut e = 0.0;
        for (i, &s) in seq.iter().enumerate() {
            e += costs[i][s];
            if i > 0 {
                let jump = seq[i - 1].abs_diff(s);
                e += match jump {
                    0 => 0.0,
                    1 => p1,
                    _ => p2,
                };
            }
        }
        best = best.min(e);
    }
    best
}

/// Index of the smallest value; the first one on ties.
pub fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] < v[best] {
            best = i;
        }
    }
    best
}
