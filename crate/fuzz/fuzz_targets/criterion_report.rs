#![no_main]

use libfuzzer_sys::fuzz_target;
use needlet::io::{parse_criterion_report, write_criterion_report};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(v) = parse_criterion_report(text) {
        let again = write_criterion_report(&v);
        parse_criterion_report(&again).expect("written form must parse");
    }
});
