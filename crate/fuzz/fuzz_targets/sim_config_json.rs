//! Fuzzes the run-spec JSON (the plan.json format) through serde.
#![no_main]
use libfuzzer_sys::fuzz_target;
use pauli_learn::sim::RunSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = serde_json::from_str::<Vec<RunSpec>>(text);
    }
});
