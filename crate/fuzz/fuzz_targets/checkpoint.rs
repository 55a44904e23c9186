#![no_main]

use libfuzzer_sys::fuzz_target;
use vastate::model::Checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(ck) = Checkpoint::from_bytes(data) {
        let bytes = ck.to_bytes().unwrap();
        assert_eq!(Checkpoint::from_bytes(&bytes).unwrap(), ck);
        if let Ok(model) = ck.to_model() {
            let mut st = model.initial_state();
            let p = vec![0.5; model.config().cond_dim];
            for x in [0.0, 1.0, -1.0] {
                let _ = model.process_sample(&mut st, x, &p);
            }
        }
    }
});
