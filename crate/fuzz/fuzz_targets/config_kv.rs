#![no_main]

use libfuzzer_sys::fuzz_target;

use causal_dqn::harness::config::parse_config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = parse_config(text) {
        // a config that parses may still fail validation, but neither path
        // is allowed to panic
        let _ = cfg.validate();
    }
});
