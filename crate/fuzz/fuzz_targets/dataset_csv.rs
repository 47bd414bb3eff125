//! Fuzzes the dataset CSV reader: accepted tables must survive a
//! write/reparse round trip.
#![no_main]
use libfuzzer_sys::fuzz_target;
use pauli_learn::sim::CbDataset;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(ds) = CbDataset::from_csv(text) {
            let again = CbDataset::from_csv(&ds.to_csv()).expect("emitted CSV reparses");
            assert_eq!(ds.runs.len(), again.runs.len());
        }
    }
});
