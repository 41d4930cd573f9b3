#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(map) = lanegame::io::parse_map(text) {
            let again = lanegame::io::write_map(map.lanes()).expect("parsed map serializes");
            lanegame::io::parse_map(&again).expect("written map parses");
        }
    }
});
