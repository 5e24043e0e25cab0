#![no_main]

use libfuzzer_sys::fuzz_target;
use tmd_coreset::io::{parse_jsonl, to_jsonl_string};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(ds) = parse_jsonl(text, "fuzz", "fuzz") {
        // Accepted input must survive a write/read cycle unchanged.
        let again = parse_jsonl(&to_jsonl_string(&ds), "fuzz", "fuzz").unwrap();
        assert_eq!(again, ds);
    }
});
