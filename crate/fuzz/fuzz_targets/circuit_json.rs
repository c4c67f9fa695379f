#![no_main]

use libfuzzer_sys::fuzz_target;
use onionsel::Circuit;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(circuit) = Circuit::from_json(text) {
        assert_eq!(circuit.links().len(), circuit.len());
        let again = Circuit::from_json(&circuit.to_json().expect("serializable")).expect("round trip");
        assert_eq!(circuit, again);
    }
});
