#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(tracks) = lanegame::io::parse_trajectories(text) {
            let again = lanegame::io::write_trajectories(&tracks).expect("parsed tracks serialize");
            let back = lanegame::io::parse_trajectories(&again).expect("written tracks parse");
            assert_eq!(back.len(), tracks.len());
        }
    }
});
