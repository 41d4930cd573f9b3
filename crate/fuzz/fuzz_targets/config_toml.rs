#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use lanegame::pipeline::PipelineConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = PipelineConfig::from_toml(text, Path::new("/")) {
            let _ = cfg.validate();
        }
    }
});
