#![no_main]

use libfuzzer_sys::fuzz_target;
use stereocost::synth::SceneSpec;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(spec) = SceneSpec::from_config_str(text) {
        let again =
            SceneSpec::from_config_str(&spec.to_config_string()).expect("printed config parses");
        assert_eq!(again, spec);
    }
});
