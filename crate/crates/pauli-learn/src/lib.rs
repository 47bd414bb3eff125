//! Learnability analysis and cycle-benchmarking simulation for Pauli noise
//! attached to Clifford gate sets.
//!
//! The library answers three questions about the gate-dependent Pauli noise
//! of an n-qubit Clifford gate set under SPAM noise:
//!
//! 1. **What is learnable?** Build the pattern transfer graph
//!    ([`graph::PatternGraph`]): learnable linear functions of log Pauli
//!    fidelities are exactly its cycle space, the unlearnable gauge
//!    directions its cut space, so there are 2^n - c unlearnable degrees
//!    of freedom.
//! 2. **How is it learned?** Simulate standard, interleaved and intercept
//!    cycle benchmarking at shot level ([`sim`]), and fit the decays to
//!    reconstruct everything the cycle space spans ([`fit`]).
//! 3. **What about the rest?** Construct explicit gauge transformations
//!    that move only the cut directions ([`gauge`]) and bound them through
//!    physical feasibility regions ([`fit::feasible_region`]).

pub mod channel;
pub mod clifford;
pub mod fit;
pub mod gauge;
pub mod graph;
pub mod pauli;
pub mod ptm;
pub mod report;
pub mod sim;

pub use channel::{NoiseModel, PauliChannel, ValidationMode};
pub use clifford::{CliffordGate, GateSet};
pub use gauge::GaugeTransform;
pub use graph::{EdgeFunctional, PatternGraph};
pub use pauli::{PauliOp, Sign};
