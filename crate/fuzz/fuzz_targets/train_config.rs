#![no_main]

use libfuzzer_sys::fuzz_target;
use vastate::training::TrainConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = TrainConfig::parse(text) {
            assert!(cfg.batch_size > 0 && cfg.segment_len > 0);
            assert!(cfg.initial_lr.is_finite() && cfg.initial_lr > 0.0);
        }
    }
});
