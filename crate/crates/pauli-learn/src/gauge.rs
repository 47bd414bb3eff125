//! Gauge transformations: the constructive side of unlearnability.
//!
//! A cut gauge rescales the Pauli-coefficient metric inside a vertex set V1
//! of the pattern transfer graph: M(P) = eta^{1[pt(P) in V1]} P. Applied as
//! rho -> M(rho), E -> (M^-1)^dag(E), G -> M G M^-1, it leaves every
//! experiment's statistics unchanged while multiplying each gate fidelity
//! by eta^(s), s = 1[head in V1] - 1[tail in V1] per graph edge, and the
//! SPAM fidelities by eta^(+-1[pattern in V1]). The single-qubit
//! depolarizing gauge is the special case V1 = {patterns with bit i set}.
//!
//! Validity window: shrinking requires 1 > eta > (p_min + 1)^-1 where p_min
//! is the smallest Pauli error rate across all SPAM and gate channels
//! (then p'_c >= p_c - (eta^-1 - 1) > 0); the bound is symmetric for
//! eta > 1.

use std::collections::BTreeSet;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{NoiseModel, PauliChannel, ValidationMode};
use crate::clifford::{closing_layer, layer_gate, single_qubit_cliffords, CliffordGate, GateSet};
use crate::pauli::{pattern_of_index, PauliOp};
use crate::ptm::{CliffordTable, PauliVec, MAX_DENSE_QUBITS};

#[derive(Debug, Error)]
pub enum GaugeError {
    #[error("eta = {eta} outside the validity window ({lo:.6}, {hi:.6})")]
    EtaOutsideWindow { eta: f64, lo: f64, hi: f64 },
    #[error("gauge qubit {0} out of range for n = {1}")]
    QubitOutOfRange(usize, usize),
    #[error("cut set contains pattern {0} out of range for n = {1}")]
    PatternOutOfRange(u64, usize),
    #[error("noise model violates assumption-4 validity before gauging")]
    InvalidModel,
    #[error("gauged model failed assumption-4 re-validation")]
    GaugedModelInvalid,
    #[error("indistinguishability certification requires n <= {MAX_DENSE_QUBITS}, got {0}")]
    TooLarge(usize),
    #[error("noise model has no channel for gate {0:?}")]
    MissingGate(String),
    #[error("malformed gauge JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// A gauge transformation specification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GaugeTransform {
    Depolarizing { qubit: usize, eta: f64 },
    Cut { v1: BTreeSet<u64>, eta: f64 },
    Composite { parts: Vec<GaugeTransform> },
}

impl GaugeTransform {
    pub fn from_json(text: &str) -> Result<GaugeTransform, GaugeError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }
}

/// Allowed eta interval ((p_min+1)^-1, p_min+1) for a model; eta = 1 is the
/// identity gauge and always allowed.
pub fn eta_window(model: &NoiseModel) -> (f64, f64) {
    let p_min = model.min_error_rate().max(0.0);
    (1.0 / (1.0 + p_min), 1.0 + p_min)
}

fn check_eta(model: &NoiseModel, eta: f64) -> Result<(), GaugeError> {
    let (lo, hi) = eta_window(model);
    if eta == 1.0 {
        return Ok(());
    }
    if !(eta > lo && eta < hi) || !eta.is_finite() || eta <= 0.0 {
        return Err(GaugeError::EtaOutsideWindow { eta, lo, hi });
    }
    Ok(())
}

/// Applies a gauge to a noise model. The gate set supplies the conjugation
/// action that decides which fidelities cross the cut.
pub fn apply_gauge(
    model: &NoiseModel,
    transform: &GaugeTransform,
    gates: &GateSet,
) -> Result<NoiseModel, GaugeError> {
    if !model.is_valid(ValidationMode::Assumption4) {
        return Err(GaugeError::InvalidModel);
    }
    let out = apply_unchecked(model, transform, gates)?;
    if !out.is_valid(ValidationMode::Assumption4) {
        return Err(GaugeError::GaugedModelInvalid);
    }
    Ok(out)
}

fn apply_unchecked(
    model: &NoiseModel,
    transform: &GaugeTransform,
    gates: &GateSet,
) -> Result<NoiseModel, GaugeError> {
    let n = model.n();
    match transform {
        GaugeTransform::Composite { parts } => {
            let mut current = model.clone();
            for part in parts {
                current = apply_gauge(&current, part, gates)?;
            }
            Ok(current)
        }
        GaugeTransform::Depolarizing { qubit, eta } => {
            if *qubit >= n {
                return Err(GaugeError::QubitOutOfRange(*qubit, n));
            }
            let v1: BTreeSet<u64> =
                (0..1u64 << n).filter(|p| (p >> qubit) & 1 == 1).collect();
            apply_cut(model, &v1, *eta, gates)
        }
        GaugeTransform::Cut { v1, eta } => {
            for &p in v1 {
                if p >= (1u64 << n) {
                    return Err(GaugeError::PatternOutOfRange(p, n));
                }
            }
            apply_cut(model, v1, *eta, gates)
        }
    }
}

fn apply_cut(
    model: &NoiseModel,
    v1: &BTreeSet<u64>,
    eta: f64,
    gates: &GateSet,
) -> Result<NoiseModel, GaugeError> {
    check_eta(model, eta)?;
    let n = model.n();
    let size = 1usize << (2 * n);
    // The identity pattern is always an isolated component (every gate
    // fixes I), so including it in V1 only adds the unobservable global
    // scale, which would break trace preservation. Drop it: the remaining
    // map is the TP representative of the same gauge class.
    let v1: BTreeSet<u64> = v1.iter().copied().filter(|&p| p != 0).collect();
    let inside = |pattern: u64| v1.contains(&pattern);

    // E^S <- M E^S, E^M <- E^M M^-1.
    let scale = |ch: &PauliChannel, exponent: f64| -> PauliChannel {
        let lambdas = ch
            .lambdas()
            .iter()
            .enumerate()
            .map(|(idx, &l)| {
                if inside(pattern_of_index(idx as u64)) {
                    l * eta.powf(exponent)
                } else {
                    l
                }
            })
            .collect();
        PauliChannel::from_lambdas(lambdas).unwrap()
    };
    let sp = scale(&model.sp_noise, 1.0);
    let meas = scale(&model.meas_noise, -1.0);

    let mut gate_noise = std::collections::BTreeMap::new();
    for gate in gates.gates() {
        let ch = model
            .gate_noise
            .get(gate.name())
            .ok_or_else(|| GaugeError::MissingGate(gate.name().to_string()))?;
        let mut lambdas = Vec::with_capacity(size);
        for a in 0..size as u64 {
            let p = PauliOp::from_index(n, a);
            let s = i8::from(inside(gate.conjugate(&p).pattern())) - i8::from(inside(p.pattern()));
            lambdas.push(ch.lambda(a) * eta.powi(s as i32));
        }
        gate_noise.insert(gate.name().to_string(), PauliChannel::from_lambdas(lambdas).unwrap());
    }
    // Channels for gates outside the supplied set pass through untouched.
    for (name, ch) in &model.gate_noise {
        gate_noise.entry(name.clone()).or_insert_with(|| ch.clone());
    }
    Ok(NoiseModel { sp_noise: sp, meas_noise: meas, gate_noise })
}

/// Midpoint-of-window eta, the default when none is specified.
pub fn default_eta(model: &NoiseModel) -> f64 {
    let (lo, _) = eta_window(model);
    (lo + 1.0) / 2.0
}

/// One randomized experiment layout for the certification oracle.
#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSpec {
    pub prepare: String,
    pub ops: Vec<ExperimentOp>,
    pub bases: Vec<u8>,
}

#[derive(Clone, Debug, Serialize)]
pub enum ExperimentOp {
    /// Noisy gate-set gate by index.
    Gate(usize),
    /// Noiseless single-qubit Clifford layer (one library index per qubit).
    Layer(Vec<usize>),
}

#[derive(Clone, Debug, Serialize)]
pub struct CertifyReport {
    pub trials: usize,
    pub max_deviation: f64,
    /// Index of the worst-deviating experiment.
    pub worst_trial: usize,
    pub indistinguishable: bool,
    pub tolerance: f64,
}

/// Certifies two noise models indistinguishable by exact dense evaluation
/// of randomized experiments (plus deterministic CB-style circuits for
/// every pattern-preserving Pauli, which give the distinguishable direction
/// its power). Tolerance 1e-9.
pub fn certify_indistinguishable(
    m1: &NoiseModel,
    m2: &NoiseModel,
    gates: &GateSet,
    trials: usize,
    seed: u64,
) -> Result<CertifyReport, GaugeError> {
    let n = gates.n();
    if n > MAX_DENSE_QUBITS {
        return Err(GaugeError::TooLarge(n));
    }
    let lib = single_qubit_cliffords();
    let mut experiments = deterministic_cb_experiments(gates, &lib);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    for _ in 0..trials {
        experiments.push(random_experiment(gates, &lib, n, &mut rng));
    }

    let gate_tables: Vec<CliffordTable> =
        gates.gates().iter().map(CliffordTable::new).collect();
    let layer_table = |layer: &[usize]| CliffordTable::new(&layer_gate(&lib, layer));

    let run = |model: &NoiseModel, exp: &ExperimentSpec| -> Result<Vec<f64>, GaugeError> {
        let prep: PauliOp = exp.prepare.parse().expect("experiment Pauli is valid");
        let mut state = PauliVec::eigenstate(&prep);
        state.apply_pauli_channel(&model.sp_noise);
        for op in &exp.ops {
            match op {
                ExperimentOp::Gate(gi) => {
                    let name = gates.gate(*gi).name();
                    let ch = model
                        .gate_noise
                        .get(name)
                        .ok_or_else(|| GaugeError::MissingGate(name.to_string()))?;
                    state.apply_pauli_channel(ch);
                    state.apply_clifford(&gate_tables[*gi]);
                }
                ExperimentOp::Layer(layer) => {
                    state.apply_clifford(&layer_table(layer));
                }
            }
        }
        state.apply_pauli_channel(&model.meas_noise);
        Ok(state.measure_distribution(&exp.bases))
    };

    let mut max_deviation = 0.0f64;
    let mut worst_trial = 0;
    for (t, exp) in experiments.iter().enumerate() {
        let d1 = run(m1, exp)?;
        let d2 = run(m2, exp)?;
        for (a, b) in d1.iter().zip(&d2) {
            let dev = (a - b).abs();
            if dev > max_deviation {
                max_deviation = dev;
                worst_trial = t;
            }
        }
    }
    let tolerance = 1e-9;
    Ok(CertifyReport {
        trials: experiments.len(),
        max_deviation,
        worst_trial,
        indistinguishable: max_deviation <= tolerance,
        tolerance,
    })
}

/// CB-style circuits (alternating gate and closing single-qubit layer) for
/// every pattern-preserving Pauli of every gate, depths 1..=4.
fn deterministic_cb_experiments(gates: &GateSet, lib: &[CliffordGate]) -> Vec<ExperimentSpec> {
    let n = gates.n();
    let mut out = Vec::new();
    for (gi, gate) in gates.gates().iter().enumerate() {
        for a in 1..(1u64 << (2 * n)) {
            let p = PauliOp::from_index(n, a);
            let img = gate.conjugate(&p);
            if img.pattern() != p.pattern() {
                continue;
            }
            let Some(layer) = closing_layer(lib, &img, &p) else { continue };
            let bases: Vec<u8> =
                (0..n).map(|j| if p.digit(j) == 0 { 2 } else { p.digit(j) }).collect();
            for depth in 1..=4usize {
                let ops = (0..depth)
                    .flat_map(|_| {
                        [ExperimentOp::Gate(gi), ExperimentOp::Layer(layer.clone())]
                    })
                    .collect();
                out.push(ExperimentSpec { prepare: p.to_string(), ops, bases: bases.clone() });
            }
        }
    }
    out
}

fn random_experiment(
    gates: &GateSet,
    lib: &[CliffordGate],
    n: usize,
    rng: &mut ChaCha12Rng,
) -> ExperimentSpec {
    let size = 1u64 << (2 * n);
    let prepare = PauliOp::from_index(n, rng.random_range(1..size));
    let depth = rng.random_range(1..=8usize);
    let ops = (0..depth)
        .map(|_| {
            if rng.random_bool(0.5) {
                ExperimentOp::Gate(rng.random_range(0..gates.len()))
            } else {
                ExperimentOp::Layer((0..n).map(|_| rng.random_range(0..lib.len())).collect())
            }
        })
        .collect();
    let bases = (0..n).map(|_| rng.random_range(1..=3u8)).collect();
    ExperimentSpec { prepare: prepare.to_string(), ops, bases }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::cnot;
    use crate::graph::PatternGraph;
    use crate::pauli::PauliOp;

    fn cnot_set() -> GateSet {
        GateSet::new(vec![cnot()]).unwrap()
    }

    /// A strictly-positive test model: uniform error rates of total weight
    /// delta, so p_min = delta/15 and the eta window is comfortably wide.
    fn test_model(delta: f64) -> NoiseModel {
        let uniform = |d: f64| {
            let mut p = vec![d / 15.0; 16];
            p[0] = 1.0 - d;
            PauliChannel::from_error_rates(p).unwrap()
        };
        NoiseModel::new(
            uniform(delta * 0.5),
            uniform(delta * 0.7),
            [("CNOT".to_string(), uniform(delta))].into(),
        )
        .unwrap()
    }

    fn idx(s: &str) -> u64 {
        s.parse::<PauliOp>().unwrap().index()
    }

    #[test]
    fn depolarizing_gauge_three_cases() {
        let model = test_model(0.04);
        let (lo, _) = eta_window(&model);
        let eta = (lo + 1.0) / 2.0;
        let gauged = apply_gauge(
            &model,
            &GaugeTransform::Depolarizing { qubit: 0, eta },
            &cnot_set(),
        )
        .unwrap();
        let before = &model.gate_noise["CNOT"];
        let after = &gauged.gate_noise["CNOT"];
        // IZ: pattern 01 -> 11 enters V1 (qubit-0 bit turns on): eta.
        assert!((after.lambda(idx("IZ")) - eta * before.lambda(idx("IZ"))).abs() < 1e-14);
        // ZZ: 11 -> 01 leaves V1: eta^-1.
        assert!((after.lambda(idx("ZZ")) - before.lambda(idx("ZZ")) / eta).abs() < 1e-14);
        // IX: self-loop, unchanged.
        assert!((after.lambda(idx("IX")) - before.lambda(idx("IX"))).abs() < 1e-14);
        // Trace preservation.
        assert!((after.lambda(0) - 1.0).abs() < 1e-12);
        assert!((gauged.sp_noise.lambda(0) - 1.0).abs() < 1e-12);
        // SPAM updates: E^S gains eta on V1 patterns, E^M loses it.
        assert!(
            (gauged.sp_noise.lambda(idx("XI")) - eta * model.sp_noise.lambda(idx("XI"))).abs()
                < 1e-14
        );
        assert!(
            (gauged.meas_noise.lambda(idx("XI")) - model.meas_noise.lambda(idx("XI")) / eta).abs()
                < 1e-14
        );
        assert!(gauged.is_valid(ValidationMode::Assumption4));
    }

    #[test]
    fn identity_pattern_cut_changes_nothing() {
        let model = test_model(0.15);
        let eta = (1.0 + eta_window(&model).1) / 2.0;
        let gauged = apply_gauge(
            &model,
            &GaugeTransform::Cut { v1: [0u64].into(), eta },
            &cnot_set(),
        )
        .unwrap();
        // No edge crosses the {00} cut: the entire model is unchanged.
        assert_eq!(gauged, model);
    }

    #[test]
    fn eta_one_is_identity() {
        let model = test_model(0.03);
        let gauged =
            apply_gauge(&model, &GaugeTransform::Depolarizing { qubit: 1, eta: 1.0 }, &cnot_set())
                .unwrap();
        assert_eq!(gauged, model);
    }

    #[test]
    fn eta_window_rejection() {
        let model = test_model(0.01);
        let (lo, hi) = eta_window(&model);
        let err = apply_gauge(
            &model,
            &GaugeTransform::Depolarizing { qubit: 0, eta: lo * 0.5 },
            &cnot_set(),
        )
        .unwrap_err();
        match err {
            GaugeError::EtaOutsideWindow { lo: l, hi: h, .. } => {
                assert!((l - lo).abs() < 1e-12 && (h - hi).abs() < 1e-12);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn cycle_functionals_are_gauge_invariant() {
        let model = test_model(0.3);
        let gates = cnot_set();
        let graph = PatternGraph::build(&gates).unwrap();
        // Quarter of the way into the shrinking window, so the composite's
        // second application still has room after the first one.
        let eta = (3.0 + eta_window(&model).0) / 4.0;
        for transform in [
            GaugeTransform::Depolarizing { qubit: 0, eta },
            GaugeTransform::Depolarizing { qubit: 1, eta },
            GaugeTransform::Cut { v1: [1u64, 3].into(), eta },
            GaugeTransform::Composite {
                parts: vec![
                    GaugeTransform::Depolarizing { qubit: 0, eta },
                    GaugeTransform::Cut { v1: [2u64].into(), eta: 1.0 / eta },
                ],
            },
        ] {
            let gauged = apply_gauge(&model, &transform, &gates).unwrap();
            let l1 = model.log_fidelities(&["CNOT"]).unwrap();
            let l2 = gauged.log_fidelities(&["CNOT"]).unwrap();
            for v in &graph.cycle_space().vectors {
                let (f1, f2) = (v.dot_dense(&l1), v.dot_dense(&l2));
                assert!((f1 - f2).abs() < 1e-10, "cycle functional moved under gauge");
            }
        }
    }

    #[test]
    fn cut_vector_shift_is_exact() {
        let model = test_model(0.3);
        let gates = cnot_set();
        let graph = PatternGraph::build(&gates).unwrap();
        let eta = 1.005;
        for v1 in [vec![1u64], vec![2], vec![3], vec![1, 2]] {
            let set: BTreeSet<u64> = v1.iter().copied().collect();
            let gauged =
                apply_gauge(&model, &GaugeTransform::Cut { v1: set.clone(), eta }, &gates)
                    .unwrap();
            let l1 = model.log_fidelities(&["CNOT"]).unwrap();
            let l2 = gauged.log_fidelities(&["CNOT"]).unwrap();
            let entries = graph.cut_vector_entries(&v1);
            let mut expected = vec![0.0; l1.len()];
            for (idx, s) in entries {
                expected[idx] = eta.ln() * s as f64;
            }
            for i in 0..l1.len() {
                assert!((l2[i] - l1[i] - expected[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn composite_equals_sequential() {
        let model = test_model(0.3);
        let gates = cnot_set();
        let eta = (3.0 + eta_window(&model).0) / 4.0;
        let parts = vec![
            GaugeTransform::Depolarizing { qubit: 0, eta },
            GaugeTransform::Depolarizing { qubit: 1, eta: 1.0 / eta },
        ];
        let composite = apply_gauge(
            &model,
            &GaugeTransform::Composite { parts: parts.clone() },
            &gates,
        )
        .unwrap();
        let mut sequential = model;
        for part in &parts {
            sequential = apply_gauge(&sequential, part, &gates).unwrap();
        }
        assert_eq!(composite, sequential);
    }

    #[test]
    fn gauged_model_is_indistinguishable() {
        let model = test_model(0.05);
        let gates = cnot_set();
        let gauged = apply_gauge(
            &model,
            &GaugeTransform::Depolarizing { qubit: 0, eta: default_eta(&model) },
            &gates,
        )
        .unwrap();
        let report = certify_indistinguishable(&model, &gauged, &gates, 60, 7).unwrap();
        assert!(report.indistinguishable, "max dev {}", report.max_deviation);
        let same = certify_indistinguishable(&model, &model.clone(), &gates, 30, 7).unwrap();
        assert_eq!(same.max_deviation, 0.0);
    }

    #[test]
    fn perturbed_learnable_fidelity_is_distinguished() {
        let model = test_model(0.05);
        let gates = cnot_set();
        let mut perturbed = model.clone();
        let bumped = perturbed.gate_noise["CNOT"].scaled_lambda(idx("XZ"), 1.0 - 0.01);
        perturbed.gate_noise.insert("CNOT".into(), bumped);
        let report = certify_indistinguishable(&model, &perturbed, &gates, 60, 11).unwrap();
        assert!(report.max_deviation > 1e-4, "max dev {}", report.max_deviation);
    }

    #[test]
    fn gauge_json_round_trip() {
        let t = GaugeTransform::Composite {
            parts: vec![
                GaugeTransform::Depolarizing { qubit: 0, eta: 0.99 },
                GaugeTransform::Cut { v1: [0u64, 3].into(), eta: 1.01 },
            ],
        };
        let back = GaugeTransform::from_json(&t.to_json()).unwrap();
        assert_eq!(t, back);
        let text = r#"{"kind":"depolarizing","qubit":1,"eta":0.98}"#;
        assert_eq!(
            GaugeTransform::from_json(text).unwrap(),
            GaugeTransform::Depolarizing { qubit: 1, eta: 0.98 }
        );
    }
}
