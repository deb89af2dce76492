#![no_main]

use libfuzzer_sys::fuzz_target;

use canyonsim::scenario::ScenarioConfig;

// The scenario-config parser and validator must never panic, and accepted
// configs must support receiver-path interpolation at arbitrary times.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ScenarioConfig::from_json_str(text) {
        for t in [-1.0e9, 0.0, 0.5, 1.0e9] {
            let p = cfg.receiver.position_at(t);
            assert!(p.iter().all(|c| c.is_finite()));
        }
    }
});
