#![no_main]

use libfuzzer_sys::fuzz_target;
use onionsel::simnet::parse_bandwidth_sample;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(values) = parse_bandwidth_sample(text) {
        assert!(!values.is_empty());
        assert!(values.iter().all(|v| v.is_finite() && *v > 0.0));
    }
});
