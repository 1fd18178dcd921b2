use proptest::prelude::*;

use stereocost::cnn::{decode_weights, encode_weights, FeatureNetwork};
use stereocost::image_io::{
    decode_pfm, decode_pgm, encode_pfm, encode_pgm, load_pfm, save_pfm, DisparityMap, GrayImage,
};

fn arb_map() -> impl Strategy<Value = DisparityMap> {
    (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
        let cell =
            proptest::option::weighted(0.8, prop_oneof![Just(0.0f32), 0.0f32..1e6, Just(f32::MAX)]);
        proptest::collection::vec(cell, w * h)
            .prop_map(move |v| DisparityMap::new(w, h, v).unwrap())
    })
}

fn arb_image() -> impl Strategy<Value = GrayImage> {
    (1usize..20, 1usize..20).prop_flat_map(|(w, h)| {
        proptest::collection::vec(any::<u8>(), w * h)
            .prop_map(move |b| GrayImage::from_bytes(w, h, &b).unwrap())
    })
}

#[test]
fn pfm_file_round_trip() {
    let m = DisparityMap::new(
        3,
        2,
        vec![Some(1.5), None, Some(0.0), Some(63.0), None, Some(2.25)],
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.pfm");
    save_pfm(&m, &p).unwrap();
    assert_eq!(load_pfm(&p).unwrap(), m);
}

#[test]
fn pgm_with_comment_decodes() {
    let mut bytes = b"P5\n# made by hand\n2 1\n255\n".to_vec();
    bytes.extend([0, 255]);
    let img = decode_pgm(&bytes).unwrap();
    assert_eq!(img.data(), &[0.0, 1.0]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pfm_round_trips_bit_exact(m in arb_map()) {
        let back = decode_pfm(&encode_pfm(&m)).unwrap();
        prop_assert_eq!(back.width(), m.width());
        for (a, b) in back.data().iter().zip(m.data()) {
            prop_assert_eq!(a.map(f32::to_bits), b.map(f32::to_bits));
        }
    }

    #[test]
    fn pgm_round_trips(img in arb_image()) {
        let bytes = encode_pgm(&img);
        prop_assert_eq!(decode_pgm(&bytes).unwrap(), img.clone());
        prop_assert_eq!(encode_pgm(&decode_pgm(&bytes).unwrap()), bytes);
    }

    #[test]
    fn weights_round_trip(seed in any::<u64>(), a in 1usize..6, b in 1usize..6, c in 1usize..6, d in 1usize..6) {
        let net = FeatureNetwork::<f32>::random([a, b, c, d], seed);
        let bytes = encode_weights(&net);
        prop_assert_eq!(decode_weights(&bytes).unwrap(), net);
    }

    #[test]
    fn truncated_files_are_errors(m in arb_map(), img in arb_image(), cut in 1usize..64) {
        let pfm = encode_pfm(&m);
        prop_assert!(decode_pfm(&pfm[..pfm.len().saturating_sub(cut)]).is_err());
        let pgm = encode_pgm(&img);
        prop_assert!(decode_pgm(&pgm[..pgm.len().saturating_sub(cut)]).is_err());
        let w = encode_weights(&FeatureNetwork::<f32>::random([2, 2, 2, 2], cut as u64));
        prop_assert!(decode_weights(&w[..w.len() - cut]).is_err());
    }

    #[test]
    fn decoders_never_panic(bytes in proptest::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode_pfm(&bytes);
        let _ = decode_pgm(&bytes);
        let _ = decode_weights(&bytes);
    }

    #[test]
    fn decoders_never_panic_on_plausible_headers(w in 0u32..5, h in 0u32..5, tail in proptest::collection::vec(any::<u8>(), 0..64)) {
        let mut pfm = format!("Pf\n{w} {h}\n-1.0\n").into_bytes();
        pfm.extend(&tail);
        let _ = decode_pfm(&pfm);
        let mut pgm = format!("P5\n{w} {h}\n255\n").into_bytes();
        pgm.extend(&tail);
        let _ = decode_pgm(&pgm);
    }
}
