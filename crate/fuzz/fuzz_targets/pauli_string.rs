//! Fuzzes the Pauli-string parser: must never panic, and accepted strings
//! must round-trip through Display.
#![no_main]
use libfuzzer_sys::fuzz_target;
use pauli_learn::PauliOp;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(p) = text.parse::<PauliOp>() {
            let shown = p.to_string();
            let back: PauliOp = shown.parse().expect("displayed Pauli reparses");
            assert_eq!(p, back);
            let _ = (p.pattern(), p.index(), p.weight());
        }
    }
});
