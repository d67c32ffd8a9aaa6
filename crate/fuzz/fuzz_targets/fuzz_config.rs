#![no_main]
use libfuzzer_sys::fuzz_target;

use beamgraph::scenario::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let mut config = Config::default();
    if config.apply_str(text).is_ok() {
        // anything accepted must also validate
        config.validate().unwrap();
    }
});
