#![no_main]

use libfuzzer_sys::fuzz_target;
use needlet::io::{parse_mise_matrix, write_mise_matrix};

// Q and its standard errors, separated by a NUL byte.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let (q, se) = match text.split_once('\0') {
        Some((q, se)) => (q, Some(se)),
        None => (text, None),
    };
    if let Ok(m) = parse_mise_matrix(q, se) {
        let (q2, se2) = write_mise_matrix(&m);
        parse_mise_matrix(&q2, se2.as_deref()).expect("written form must parse");
    }
});
