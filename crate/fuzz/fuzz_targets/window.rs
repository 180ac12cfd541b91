#![no_main]

use libfuzzer_sys::fuzz_target;
use needlet::io::{parse_window, write_window};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(v) = parse_window(text) {
        let again = write_window(&v.window, &v.kind);
        parse_window(&again).expect("written form must parse");
    }
});
