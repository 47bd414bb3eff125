//! Fuzzes the gate-set JSON loader: accepted gate sets must be valid
//! symplectic tableaus that survive a serialize/reparse round trip.
#![no_main]
use libfuzzer_sys::fuzz_target;
use pauli_learn::GateSet;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(set) = GateSet::from_json(text) {
            let round = GateSet::from_json(&set.to_json()).expect("emitted JSON reparses");
            assert_eq!(set.len(), round.len());
            // Conjugation stays a permutation on a couple of probes.
            if set.n() <= 4 {
                for g in set.gates() {
                    let img = g.conjugate_index(1.min((1 << (2 * set.n())) - 1));
                    assert!(img < 1 << (2 * set.n()));
                }
            }
        }
    }
});
