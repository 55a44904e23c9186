#![no_main]

use libfuzzer_sys::fuzz_target;
use vastate::data::{decode_wav, decode_wav_info, encode_wav, SampleFormat};

fuzz_target!(|data: &[u8]| {
    let _ = decode_wav_info(data);
    if let Ok(samples) = decode_wav(data) {
        // float32 holds every decodable sample exactly
        let again = decode_wav(&encode_wav(&samples, 48_000, 1, SampleFormat::Float32)).unwrap();
        assert_eq!(again.len(), samples.len());
        for (a, b) in samples.iter().zip(&again) {
            assert!(a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()));
        }
    }
});
