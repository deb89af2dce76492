#![no_main]

use libfuzzer_sys::fuzz_target;

use canyonsim::satellites::{propagate_kepler, EphemerisSet};

// The ephemeris parser must never panic, and every set it accepts must
// propagate without panicking (validation is supposed to reject anything the
// propagator cannot digest).
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(set) = EphemerisSet::from_json_str(text) {
        for eph in set.satellites.iter().take(16) {
            let _ = propagate_kepler(eph, eph.epoch_s + 123.0, true);
        }
    }
});
