#![no_main]

use libfuzzer_sys::fuzz_target;
use needlet::io::{parse_manifest, write_manifest};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(v) = parse_manifest(text) {
        let again = write_manifest(&v);
        parse_manifest(&again).expect("written form must parse");
    }
});
