#![no_main]

use ewens_pitman_cli::parse::parse_n_grid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(grid) = parse_n_grid(text) {
            assert!(!grid.is_empty());
            assert!(grid[0] > 0);
            assert!(grid.windows(2).all(|w| w[0] < w[1]));
        }
    }
});
