#![no_main]

use libfuzzer_sys::fuzz_target;
use vastate::model::parse_schedule_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(s) = parse_schedule_csv(text) {
            let last = s.points().last().map_or(0, |p| p.0);
            for n in [0, 1, last, last.saturating_add(1), usize::MAX] {
                assert_eq!(s.at(n).len(), s.cond_dim());
            }
        }
    }
});
