#![no_main]

use libfuzzer_sys::fuzz_target;
use stable_carma::io::parse_model_json;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(model) = parse_model_json(text) {
        let _ = model.family();
        let _ = model.spec();
    }
});
