#![no_main]

use libfuzzer_sys::fuzz_target;
use stereocost::cnn::{decode_weights, encode_weights};

fuzz_target!(|data: &[u8]| {
    if let Ok(net) = decode_weights(data) {
        assert_eq!(encode_weights(&net), data);
    }
});
