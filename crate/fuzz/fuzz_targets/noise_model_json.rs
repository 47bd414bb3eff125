//! Fuzzes the noise-model JSON loader.
#![no_main]
use libfuzzer_sys::fuzz_target;
use pauli_learn::NoiseModel;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(model) = NoiseModel::from_json(text) {
            let _ = model.min_error_rate();
            let _ = NoiseModel::from_json(&model.to_json()).expect("emitted JSON reparses");
        }
    }
});
