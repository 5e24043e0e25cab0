#![no_main]

use libfuzzer_sys::fuzz_target;
use tmd_coreset::io::parse_tu;

// Input is the four TU files separated by 0xff bytes: adjacency, graph
// indicator, node attributes, graph labels. Empty trailing parts are absent.
fuzz_target!(|data: &[u8]| {
    let parts: Vec<&str> = data
        .split(|&b| b == 0xff)
        .map(|p| std::str::from_utf8(p).unwrap_or(""))
        .collect();
    let get = |i: usize| parts.get(i).copied().unwrap_or("");
    let opt = |i: usize| parts.get(i).copied().filter(|s| !s.is_empty());
    let _ = parse_tu("fuzz", get(0), get(1), opt(2), opt(3));
});
