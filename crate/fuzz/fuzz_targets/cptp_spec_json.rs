//! Fuzzes the CPTP noise-spec loader and its resolution against a CNOT
//! gate set (Kraus completeness checks must reject, not panic).
#![no_main]
use libfuzzer_sys::fuzz_target;
use pauli_learn::clifford::{cnot, GateSet};
use pauli_learn::sim::CptpNoiseSpec;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(spec) = CptpNoiseSpec::from_json(text) {
            if spec.n == 2 {
                let gates = GateSet::new(vec![cnot()]).unwrap();
                let _ = spec.resolve(&gates);
            }
        }
    }
});
