#![no_main]

use libfuzzer_sys::fuzz_target;
use needlet::io::{parse_band_matrix, write_band_matrix};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok((lmin, m)) = parse_band_matrix(text) {
        let again = write_band_matrix(lmin, &m);
        parse_band_matrix(&again).expect("written form must parse");
    }
});
