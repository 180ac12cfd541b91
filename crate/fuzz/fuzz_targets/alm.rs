#![no_main]

use libfuzzer_sys::fuzz_target;
use needlet::io::{parse_alm, write_alm};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(v) = parse_alm(text) {
        let again = write_alm(&v);
        parse_alm(&again).expect("written form must parse");
    }
});
