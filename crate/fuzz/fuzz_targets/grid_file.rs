#![no_main]

use ewens_pitman_cli::parse::parse_grid_file;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_grid_file(text);
    }
});
