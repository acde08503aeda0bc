#![no_main]

use libfuzzer_sys::fuzz_target;
use stable_carma::io::parse_config_json;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(cfg) = parse_config_json(text) {
        let _ = cfg.validate();
    }
});
