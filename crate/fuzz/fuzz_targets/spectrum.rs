#![no_main]

use libfuzzer_sys::fuzz_target;
use needlet::io::{parse_spectrum, write_spectrum};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(v) = parse_spectrum(text) {
        let again = write_spectrum(&v);
        parse_spectrum(&again).expect("written form must parse");
    }
});
