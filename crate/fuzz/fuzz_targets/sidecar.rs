#![no_main]

use libfuzzer_sys::fuzz_target;
use vastate::data::{parse_dataset_manifest, parse_sidecar};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(s) = parse_sidecar(text) {
            assert_eq!(s.physical.len(), s.normalized.len());
            let _ = s.effect.denormalize(&s.normalized);
        }
        let _ = parse_dataset_manifest(text);
    }
});
