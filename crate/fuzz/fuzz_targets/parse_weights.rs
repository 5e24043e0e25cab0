#![no_main]

use libfuzzer_sys::fuzz_target;
use tmd_coreset::tmd::{FeatureNorm, WeightFn};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(w) = text.parse::<WeightFn>() {
        let _ = w.to_string().parse::<WeightFn>().unwrap();
    }
    let _ = text.parse::<FeatureNorm>();
});
