#![no_main]

use libfuzzer_sys::fuzz_target;
use stable_carma::io::{parse_series_csv, write_series_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(series) = parse_series_csv(text) {
        let again = parse_series_csv(&write_series_csv(&series)).expect("written series parses");
        assert_eq!(again.values, series.values);
    }
});
