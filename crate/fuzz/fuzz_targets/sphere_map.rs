#![no_main]

use libfuzzer_sys::fuzz_target;
use needlet::io::{parse_sphere_map, write_sphere_map};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(v) = parse_sphere_map(text) {
        let again = write_sphere_map(&v);
        parse_sphere_map(&again).expect("written form must parse");
    }
});
