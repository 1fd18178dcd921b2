#![no_main]

use libfuzzer_sys::fuzz_target;
use stereocost::image_io::{decode_pfm, encode_pfm};

fuzz_target!(|data: &[u8]| {
    if let Ok(map) = decode_pfm(data) {
        let again = decode_pfm(&encode_pfm(&map)).expect("re-encoded map decodes");
        assert_eq!(again.data().len(), map.data().len());
        for (a, b) in again.data().iter().zip(map.data()) {
            assert_eq!(a.map(f32::to_bits), b.map(f32::to_bits));
        }
    }
});
