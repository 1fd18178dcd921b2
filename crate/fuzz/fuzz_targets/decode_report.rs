#![no_main]

use libfuzzer_sys::fuzz_target;
use stereocost::evaluation::decode_report;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = decode_report(text);
    }
});
