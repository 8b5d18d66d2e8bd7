#![no_main]

use lcfuse_core::config::ScenarioConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(cfg) = ScenarioConfig::from_toml_str(text) {
            let _ = ScenarioConfig::from_toml_str(&cfg.to_toml_string());
        }
    }
});
