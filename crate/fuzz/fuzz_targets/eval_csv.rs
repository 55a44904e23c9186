#![no_main]

use libfuzzer_sys::fuzz_target;
use vastate::metrics::{parse_eval_csv, write_eval_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(rows) = parse_eval_csv(text) {
            // NaN fields break row equality, so compare the written text
            if let Ok(once) = write_eval_csv(&rows) {
                let again = write_eval_csv(&parse_eval_csv(&once).unwrap()).unwrap();
                assert_eq!(once, again);
            }
        }
    }
});
