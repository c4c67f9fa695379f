#![no_main]

use libfuzzer_sys::fuzz_target;
use onionsel::config::Config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = Config::from_toml_str(text) {
        let again =
            Config::from_toml_str(&config.to_toml_string().expect("serializable")).expect("re-parse of valid config");
        assert_eq!(config, again);
    }
});
