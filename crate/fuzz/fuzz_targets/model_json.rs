#![no_main]

use libfuzzer_sys::fuzz_target;
use lanegame::qre::UtilityModel;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(model) = UtilityModel::from_json(text) {
            let again = model.to_json().expect("loaded model serializes");
            assert_eq!(UtilityModel::from_json(&again).expect("written model loads"), model);
        }
    }
});
