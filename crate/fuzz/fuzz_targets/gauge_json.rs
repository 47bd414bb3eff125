//! Fuzzes the gauge-spec loader and its application to a fixed model.
#![no_main]
use libfuzzer_sys::fuzz_target;
use pauli_learn::channel::{NoiseModel, PauliChannel};
use pauli_learn::clifford::{cnot, GateSet};
use pauli_learn::gauge::{apply_gauge, GaugeTransform};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(transform) = GaugeTransform::from_json(text) {
            let mut p = vec![0.12 / 15.0; 16];
            p[0] = 0.88;
            let ch = PauliChannel::from_error_rates(p).unwrap();
            let model = NoiseModel::new(
                ch.clone(),
                ch.clone(),
                [("CNOT".to_string(), ch)].into(),
            )
            .unwrap();
            let gates = GateSet::new(vec![cnot()]).unwrap();
            // Invalid etas and out-of-range qubits must error, not panic.
            let _ = apply_gauge(&model, &transform, &gates);
        }
    }
});
