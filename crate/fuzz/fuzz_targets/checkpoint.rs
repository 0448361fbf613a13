#![no_main]

use libfuzzer_sys::fuzz_target;

use causal_dqn::qnet::{format_checkpoint, parse_checkpoint};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(params) = parse_checkpoint(text) {
        // bit-exact round trip is part of the checkpoint contract
        let emitted = format_checkpoint(&params);
        let again = parse_checkpoint(&emitted).expect("round trip");
        assert_eq!(again, params);
    }
});
