#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(rows) = lanegame::io::parse_events(text) {
            let labeled = rows.iter().any(|r| r.outcome.is_some() || r.active_label.is_some());
            let again = lanegame::io::write_events(&rows, labeled).expect("parsed events serialize");
            let back = lanegame::io::parse_events(&again).expect("written events parse");
            assert_eq!(back.len(), rows.len());
        }
    }
});
