#![no_main]

use libfuzzer_sys::fuzz_target;
use needlet::io::{parse_mask_spec, write_mask_spec};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(v) = parse_mask_spec(text) {
        let again = write_mask_spec(&v);
        parse_mask_spec(&again).expect("written form must parse");
    }
});
