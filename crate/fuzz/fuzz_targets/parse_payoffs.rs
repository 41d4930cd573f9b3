#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(records) = lanegame::games::parse_payoffs(text) {
            let again = lanegame::games::write_payoffs(&records).expect("parsed payoffs serialize");
            assert_eq!(lanegame::games::parse_payoffs(&again).expect("written payoffs parse"), records);
            let _ = lanegame::games::state_pool(&records);
            let _ = lanegame::games::tabulate_records(&records);
        }
    }
});
