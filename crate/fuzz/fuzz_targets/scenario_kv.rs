#![no_main]

use libfuzzer_sys::fuzz_target;
use mec_coop::scenario::parse_kv;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = parse_kv(text) {
        // Accepted scenarios must convert and validate without panicking.
        let _ = s.params();
        let _ = s.sweep();
        let _ = s.scheme_list();
    }
});
