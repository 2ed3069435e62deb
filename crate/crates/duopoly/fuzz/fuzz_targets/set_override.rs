//! Fuzzes the key=value override parser and its interaction with the
//! scenario loader: overrides must never panic, and applying an accepted
//! override must still yield a validated config or a clean error.

#![no_main]

use libfuzzer_sys::fuzz_target;

const BASE: &str = r#"{"a": 10, "b": 1, "sigma": 4, "m0": 2, "alpha": 3}"#;

fuzz_target!(|data: &[u8]| {
    let Ok(spec) = std::str::from_utf8(data) else { return };
    if duopoly::scenario::parse_override(spec).is_ok() {
        let _ = duopoly::scenario::ScenarioConfig::from_json_with_overrides(
            BASE,
            &[spec.to_string()],
        );
    }
});
