mod oracle;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stereocost::cnn::{
    cnn_cost_volume, forward_features, hinge, hinge_loss, FeatureGrid, FeatureNetwork, PatchTriple,
    CNN_BORDER_COST, PATCH_LEN, RECEPTIVE_FIELD,
};
use stereocost::disparity::right_cost_volume;
use stereocost::image_io::GrayImage;

fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize) -> GrayImage {
    let bytes: Vec<u8> = (0..w * h).map(|_| rng.random()).collect();
    GrayImage::from_bytes(w, h, &bytes).unwrap()
}

fn patch_at(img: &GrayImage, cx: usize, cy: usize) -> Vec<f32> {
    let r = RECEPTIVE_FIELD / 2;
    let mut p = Vec::with_capacity(PATCH_LEN);
    for y in cy - r..=cy + r {
        p.extend_from_slice(&img.row(y)[cx - r..=cx + r]);
    }
    p
}

#[test]
fn image_features_match_per_patch_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let net = FeatureNetwork::<f32>::random([6, 5, 7, 4], 3);
    let net64 = net.cast::<f64>();
    // taller than one processing strip so strip seams are covered
    let img = random_image(&mut rng, 23, 41);
    let grid = forward_features(&net, &img).unwrap();
    assert_eq!(grid.dim(), 4);
    for y in 0..41 {
        for x in 0..23 {
            let interior = (4..19).contains(&x) && (4..37).contains(&y);
            if !interior {
                assert!(grid.is_zero(x, y), "border ({x},{y}) not zero");
                continue;
            }
            let patch: Vec<f64> = patch_at(&img, x, y).iter().map(|&v| f64::from(v)).collect();
            let (raw, _) = oracle::net_forward(&net64, &patch, RECEPTIVE_FIELD);
            let want = oracle::unit(&raw);
            let single = net.patch_feature(&patch_at(&img, x, y)).unwrap();
            for c in 0..4 {
                let got = grid.vector(x, y)[c];
                assert!(
                    (f64::from(got) - want[c]).abs() < 1e-5,
                    "({x},{y}) c{c}: {got} vs {}",
                    want[c]
                );
                assert!((got - single[c]).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn identical_images_cost_minus_one_at_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let net = FeatureNetwork::<f32>::random([8, 8, 8, 8], 4);
    let img = random_image(&mut rng, 20, 16);
    let f = forward_features(&net, &img).unwrap();
    let cv = cnn_cost_volume(&f, &f, 3).unwrap();
    for y in 4..12 {
        for x in 4..16 {
            if !f.is_zero(x, y) {
                assert!((cv.get(x, y, 0) + 1.0).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn cost_volume_matches_dot_product_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let (w, h, dim) = (9, 5, 6);
    let grid = |rng: &mut ChaCha8Rng| {
        let mut v = Vec::with_capacity(w * h * dim);
        for _ in 0..w * h {
            let raw: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u = if rng.random_bool(0.1) {
                vec![0.0; dim]
            } else {
                oracle::unit(&raw)
            };
            v.extend(u.iter().map(|&x| x as f32));
        }
        FeatureGrid::new(w, h, dim, v).unwrap()
    };
    let (l, r) = (grid(&mut rng), grid(&mut rng));
    let cv = cnn_cost_volume(&l, &r, 4).unwrap();
    for y in 0..h {
        for x in 0..w {
            for d in 0..=4 {
                let want = if d > x || l.is_zero(x, y) || r.is_zero(x - d, y) {
                    CNN_BORDER_COST
                } else {
                    let s: f32 = l
                        .vector(x, y)
                        .iter()
                        .zip(r.vector(x - d, y))
                        .map(|(a, b)| a * b)
                        .sum();
                    -s
                };
                assert!((cv.get(x, y, d) - want).abs() < 1e-6, "({x},{y},{d})");
            }
        }
    }
}

#[test]
fn swapping_branches_reads_the_right_volume() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let net = FeatureNetwork::<f32>::random([4, 4, 4, 4], 5);
    let (a, b) = (
        random_image(&mut rng, 24, 12),
        random_image(&mut rng, 24, 12),
    );
    let (fa, fb) = (
        forward_features(&net, &a).unwrap(),
        forward_features(&net, &b).unwrap(),
    );
    let cv = cnn_cost_volume(&fa, &fb, 5).unwrap();
    let right = right_cost_volume(&cv);
    for y in 0..12 {
        for x in 0..24 {
            for d in 0..=5 {
                let want = if x + d >= 24 || fb.is_zero(x, y) || fa.is_zero(x + d, y) {
                    CNN_BORDER_COST
                } else {
                    -fb.vector(x, y)
                        .iter()
                        .zip(fa.vector(x + d, y))
                        .map(|(p, q)| p * q)
                        .sum::<f32>()
                };
                assert!((right.get(x, y, d) - want).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn horizontal_shift_shifts_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let net = FeatureNetwork::<f32>::random([5, 5, 5, 5], 6);
    let a = random_image(&mut rng, 30, 20);
    let k = 3;
    let b = GrayImage::from_fn(30, 20, |x, y| if x >= k { a.get(x - k, y) } else { 0.5 });
    let (fa, fb) = (
        forward_features(&net, &a).unwrap(),
        forward_features(&net, &b).unwrap(),
    );
    for y in 4..16 {
        for x in 4..26 - k {
            for (p, q) in fa.vector(x, y).iter().zip(fb.vector(x + k, y)) {
                assert!((p - q).abs() < 1e-6);
            }
        }
    }
}

#[test]
fn zero_network_gives_zero_features() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let net = FeatureNetwork::<f32>::zeros([3, 3, 3, 3]);
    let f = forward_features(&net, &random_image(&mut rng, 12, 12)).unwrap();
    assert!((0..12).all(|y| (0..12).all(|x| f.is_zero(x, y))));
}

fn random_triples(rng: &mut ChaCha8Rng, n: usize) -> Vec<PatchTriple> {
    (0..n)
        .map(|_| {
            let mut p = || {
                (0..PATCH_LEN)
                    .map(|_| rng.random::<f32>())
                    .collect::<Vec<_>>()
            };
            let (a, b, c) = (p(), p(), p());
            PatchTriple::new(&a, &b, &c).unwrap()
        })
        .collect()
}

fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Backprop against central differences of the loop-level reference. Returns
/// the max relative error over every parameter and over those whose
/// perturbation crosses no ReLU or hinge kink.
fn finite_difference_errors(seed: u64, h: f64) -> (f64, f64) {
    let margin = 0.2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = FeatureNetwork::<f64>::random([4, 4, 4, 4], seed);
    let triples = random_triples(&mut rng, 10);
    let mut grad = net.zeros_like();
    for t in &triples {
        grad.add_scaled(&hinge_loss(&net, t, margin).unwrap().1, 1.0);
    }
    let analytic = grad.parameters();
    let p0 = net.parameters();
    let total = |n: &FeatureNetwork<f64>| {
        let mut pattern = Vec::new();
        let mut s = 0.0;
        for t in &triples {
            let (l, p) = oracle::triple_loss(n, t, margin);
            s += l;
            pattern.extend(p);
        }
        (s, pattern)
    };
    let (_, pattern0) = total(&net);
    let (mut all, mut smooth) = (0.0f64, 0.0f64);
    for i in 0..p0.len() {
        let shifted = |delta: f64| {
            let mut q = p0.clone();
            q[i] += delta;
            let mut n = net.clone();
            n.set_parameters(&q).unwrap();
            total(&n)
        };
        let ((up, pu), (down, pd)) = (shifted(h), shifted(-h));
        let rel = relative_error(analytic[i], (up - down) / (2.0 * h));
        all = all.max(rel);
        if pu == pattern0 && pd == pattern0 {
            smooth = smooth.max(rel);
        }
    }
    (all, smooth)
}

#[test]
fn backprop_matches_fine_finite_differences() {
    let (all, _) = finite_difference_errors(0x96ad, 1e-5);
    assert!(all < 1e-4, "max relative error {all}");
}

#[test]
fn backprop_matches_coarse_differences_away_from_kinks() {
    let (_, smooth) = finite_difference_errors(0x96ad, 1e-3);
    assert!(smooth < 1e-4, "max relative error without kinks {smooth}");
}

#[test]
fn loss_values_match_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let net = FeatureNetwork::<f64>::random([4, 6, 4, 3], 8);
    for t in random_triples(&mut rng, 5) {
        let (l, _) = hinge_loss(&net, &t, 0.3).unwrap();
        let (want, _) = oracle::triple_loss(&net, &t, 0.3);
        assert!((l.loss - want).abs() < 1e-12);
        assert_eq!(l.loss, hinge(l.s_pos, l.s_neg, 0.3));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn features_are_unit_or_zero(seed in any::<u64>(), w in 9usize..20, h in 9usize..20) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = FeatureNetwork::<f32>::random([3, 4, 3, 5], seed);
        let f = forward_features(&net, &random_image(&mut rng, w, h)).unwrap();
        for y in 0..h {
            for x in 0..w {
                let n: f32 = f.vector(x, y).iter().map(|v| v * v).sum::<f32>().sqrt();
                prop_assert!(n == 0.0 || (n - 1.0).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn costs_stay_in_unit_interval(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = FeatureNetwork::<f32>::random([4, 4, 4, 4], seed);
        let (a, b) = (random_image(&mut rng, 16, 12), random_image(&mut rng, 16, 12));
        let cv = cnn_cost_volume(&forward_features(&net, &a).unwrap(), &forward_features(&net, &b).unwrap(), 6).unwrap();
        prop_assert!(cv.costs().iter().all(|c| (-1.0..=1.0).contains(c)));
        prop_assert_eq!(cv.border_cost(), 1.0);
    }

    #[test]
    fn hinge_is_zero_gradient_when_inactive(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = FeatureNetwork::<f64>::random([3, 3, 3, 3], seed);
        let a: Vec<f32> = (0..PATCH_LEN).map(|_| rng.random()).collect();
        let c: Vec<f32> = (0..PATCH_LEN).map(|_| rng.random()).collect();
        // positive identical to the reference: s_pos = 1 so a small margin is inactive unless s_neg is near 1
        let t = PatchTriple::new(&a, &a, &c).unwrap();
        let (l, g) = hinge_loss(&net, &t, 1e-3).unwrap();
        if l.loss == 0.0 {
            prop_assert!(g.parameters().iter().all(|&v| v == 0.0));
        }
    }
}
