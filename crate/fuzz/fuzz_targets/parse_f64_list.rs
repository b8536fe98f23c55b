#![no_main]

use ewens_pitman_cli::parse::parse_f64_list;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(values) = parse_f64_list(text) {
            assert!(values.iter().all(|v| v.is_finite()));
        }
    }
});
