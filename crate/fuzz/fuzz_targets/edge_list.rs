#![no_main]

use libfuzzer_sys::fuzz_target;

use causal_dqn::discovery::{cpe_from_edge_list, format_cpe, parse_edge_list};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok((p, entries)) = parse_edge_list(text) {
        if p > 512 {
            return; // keep allocation bounded under fuzzing
        }
        if let Ok(cpe) = cpe_from_edge_list(p, &entries) {
            let emitted = format_cpe(&cpe);
            let (p2, entries2) = parse_edge_list(&emitted).expect("round trip");
            let again = cpe_from_edge_list(p2, &entries2).expect("round trip");
            assert_eq!(again, cpe);
        }
    }
});
