#![no_main]

use libfuzzer_sys::fuzz_target;

use canyonsim::citymodel::CityModel;

// Arbitrary bytes must never panic the building-set parser. When a model does
// parse, serializing and reloading it must reproduce the geometry exactly
// (normalization idempotence).
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = CityModel::from_json_str(text) {
        let reloaded = CityModel::from_json_str(&model.to_json_string())
            .expect("serialized model must reload");
        assert_eq!(model, reloaded, "reload must be bit-identical");
    }
});
