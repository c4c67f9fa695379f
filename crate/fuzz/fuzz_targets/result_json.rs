#![no_main]

use libfuzzer_sys::fuzz_target;
use onionsel::experiment::{from_json, write_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(result) = from_json(text) {
        let _ = write_csv(&result, std::io::sink());
    }
});
