#![no_main]

use ewens_pitman_cli::parse::parse_schedule;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(s) = parse_schedule(text) {
            assert!(s.c > 0.0 && s.c.is_finite());
            assert!(s.p >= 0.0 && s.p.is_finite() && s.q.is_finite());
        }
    }
});
