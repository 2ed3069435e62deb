//! Fuzzes the JSON scenario loader: arbitrary input must produce either a
//! fully validated config or a clean error — never a panic, and never a
//! config violating the numeric invariants.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = duopoly::scenario::ScenarioConfig::from_json_str(text) {
        // anything the loader accepts must satisfy the domain invariants
        assert!(cfg.params.a > 0.0 && cfg.params.b > 0.0);
        assert!(cfg.tech.sigma > 0.0 && cfg.tech.m0 > 0.0 && cfg.tech.alpha > 1.0);
        assert!(cfg.m_i > 0.0 && cfg.m_i <= cfg.tech.m0);
        assert!(cfg.m_j > 0.0 && cfg.m_j <= cfg.tech.m0);
    }
});
