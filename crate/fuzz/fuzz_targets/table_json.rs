#![no_main]

use ewens_pitman_cli::table::Table;
use libfuzzer_sys::fuzz_target;

// Anything the decoder accepts must survive a re-encode unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok((manifest, table)) = Table::from_json(text) else { return };
    let again = table.to_json(&manifest);
    let (manifest2, table2) = Table::from_json(&again).expect("re-encoded table decodes");
    assert_eq!(manifest, manifest2);
    assert_eq!(table.columns, table2.columns);
    assert_eq!(table.rows.len(), table2.rows.len());
});
