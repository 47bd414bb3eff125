//! Pauli channels in the fidelity (lambda) and error-rate (p) bases.
//!
//! The two bases are related by the Walsh-Hadamard transform
//! lambda_b = sum_a p_a (-1)^<a,b>, p_a = 4^-n sum_b lambda_b (-1)^<a,b>,
//! implemented as n butterfly stages of a per-qubit 4x4 kernel over the
//! canonical interleaved index (see [`crate::pauli`]).
//!
//! Fidelities are the primary stored representation (cycle benchmarking
//! estimates fidelities); error rates are derived lazily and cached.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::pauli::{pattern_of_index, MAX_QUBITS};

/// Slack used when checking CPTP constraints, absorbing float error.
pub const CPTP_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("vector length {0} is not 4^n for any supported n")]
    BadLength(usize),
    #[error("channel qubit counts differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("unknown basis {0:?} (expected \"lambda\" or \"p\")")]
    BadBasis(String),
    #[error("noise model is missing a channel for gate {0:?}")]
    MissingGate(String),
    #[error("malformed channel JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn qubits_for_len(len: usize) -> Result<usize, ChannelError> {
    let mut n = 0;
    let mut size = 1usize;
    while size < len && n <= MAX_QUBITS {
        size *= 4;
        n += 1;
    }
    if size == len && len >= 1 {
        Ok(n)
    } else {
        Err(ChannelError::BadLength(len))
    }
}

/// In-place Walsh-Hadamard transform over Pauli labels (no normalization).
///
/// Each qubit contributes the self-inverse (up to a factor 4) kernel
/// `M[d][d'] = (-1)^(x z' + z x')` over digits d = (z x).
pub fn wht_in_place(values: &mut [f64]) {
    let len = values.len();
    debug_assert!(qubits_for_len(len).is_ok());
    let mut stride = 1usize;
    while stride < len {
        let block = stride * 4;
        for base in (0..len).step_by(block) {
            for off in 0..stride {
                let i0 = base + off;
                let (a, b, c, d) =
                    (values[i0], values[i0 + stride], values[i0 + 2 * stride], values[i0 + 3 * stride]);
                values[i0] = a + b + c + d;
                values[i0 + stride] = a + b - c - d;
                values[i0 + 2 * stride] = a - b + c - d;
                values[i0 + 3 * stride] = a - b - c + d;
            }
        }
        stride = block;
    }
}

/// lambda_b = sum_a p_a (-1)^<a,b>.
pub fn wht_p_to_lambda(p: &[f64]) -> Result<Vec<f64>, ChannelError> {
    qubits_for_len(p.len())?;
    let mut out = p.to_vec();
    wht_in_place(&mut out);
    Ok(out)
}

/// p_a = 4^-n sum_b lambda_b (-1)^<a,b>.
pub fn wht_lambda_to_p(lambda: &[f64]) -> Result<Vec<f64>, ChannelError> {
    qubits_for_len(lambda.len())?;
    let mut out = lambda.to_vec();
    wht_in_place(&mut out);
    let norm = 1.0 / lambda.len() as f64;
    for v in &mut out {
        *v *= norm;
    }
    Ok(out)
}

/// An n-qubit Pauli diagonal map, stored by its Pauli fidelities.
#[derive(Clone, Debug)]
pub struct PauliChannel {
    n: usize,
    lambdas: Vec<f64>,
    error_rates: OnceLock<Vec<f64>>,
}

impl PauliChannel {
    pub fn from_lambdas(lambdas: Vec<f64>) -> Result<PauliChannel, ChannelError> {
        let n = qubits_for_len(lambdas.len())?;
        Ok(PauliChannel { n, lambdas, error_rates: OnceLock::new() })
    }

    pub fn from_error_rates(p: Vec<f64>) -> Result<PauliChannel, ChannelError> {
        let lambdas = wht_p_to_lambda(&p)?;
        let n = qubits_for_len(lambdas.len())?;
        let cache = OnceLock::new();
        let _ = cache.set(p);
        Ok(PauliChannel { n, lambdas, error_rates: cache })
    }

    pub fn identity(n: usize) -> PauliChannel {
        PauliChannel::from_lambdas(vec![1.0; 1 << (2 * n)]).unwrap()
    }

    /// Per-qubit depolarizing channel: p = (1-3q/4, q/4, q/4, q/4) on the
    /// given qubit, i.e. lambda = 1-q on its non-identity Paulis.
    pub fn depolarizing(n: usize, qubit: usize, q: f64) -> PauliChannel {
        let size = 1usize << (2 * n);
        let mut lambdas = vec![1.0; size];
        for (idx, l) in lambdas.iter_mut().enumerate() {
            if (pattern_of_index(idx as u64) >> qubit) & 1 == 1 {
                *l = 1.0 - q;
            }
        }
        PauliChannel::from_lambdas(lambdas).unwrap()
    }

    /// Bit-flip (X error) channel with rate q on the given qubit:
    /// lambda = 1-2q on Paulis whose factor there anticommutes with X.
    pub fn bit_flip(n: usize, qubit: usize, q: f64) -> PauliChannel {
        let size = 1usize << (2 * n);
        let mut lambdas = vec![1.0; size];
        for (idx, l) in lambdas.iter_mut().enumerate() {
            let digit = (idx >> (2 * qubit)) & 3;
            if digit == 2 || digit == 3 {
                *l = 1.0 - 2.0 * q;
            }
        }
        PauliChannel::from_lambdas(lambdas).unwrap()
    }

    /// Independent bit-flip channels, one rate per qubit.
    pub fn bit_flip_each(rates: &[f64]) -> PauliChannel {
        let n = rates.len();
        let mut ch = PauliChannel::identity(n);
        for (qubit, &q) in rates.iter().enumerate() {
            ch = ch.compose(&PauliChannel::bit_flip(n, qubit, q)).unwrap();
        }
        ch
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn size(&self) -> usize {
        self.lambdas.len()
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn lambda(&self, idx: u64) -> f64 {
        self.lambdas[idx as usize]
    }

    /// Error rates, computed once on first use.
    pub fn error_rates(&self) -> &[f64] {
        self.error_rates.get_or_init(|| wht_lambda_to_p(&self.lambdas).unwrap())
    }

    /// Composition of Pauli diagonal maps multiplies fidelities entrywise.
    pub fn compose(&self, other: &PauliChannel) -> Result<PauliChannel, ChannelError> {
        if self.n != other.n {
            return Err(ChannelError::DimensionMismatch(self.n, other.n));
        }
        let lambdas = self
            .lambdas
            .iter()
            .zip(&other.lambdas)
            .map(|(a, b)| a * b)
            .collect();
        PauliChannel::from_lambdas(lambdas)
    }

    /// Returns a copy with one fidelity multiplied by the given factor.
    pub fn scaled_lambda(&self, idx: u64, factor: f64) -> PauliChannel {
        let mut lambdas = self.lambdas.clone();
        lambdas[idx as usize] *= factor;
        PauliChannel::from_lambdas(lambdas).unwrap()
    }

    pub fn validate(&self, mode: ValidationMode) -> ValidationReport {
        let mut violations = Vec::new();
        if (self.lambdas[0] - 1.0).abs() > CPTP_TOL {
            violations.push(Violation {
                constraint: "lambda_identity = 1".into(),
                index: 0,
                magnitude: (self.lambdas[0] - 1.0).abs(),
            });
        }
        let p = self.error_rates();
        for (idx, &pa) in p.iter().enumerate() {
            if pa < -CPTP_TOL {
                violations.push(Violation {
                    constraint: "p >= 0".into(),
                    index: idx,
                    magnitude: -pa,
                });
            }
        }
        if mode == ValidationMode::Assumption4 {
            for (idx, &pa) in p.iter().enumerate() {
                if pa <= CPTP_TOL {
                    violations.push(Violation {
                        constraint: "p > 0".into(),
                        index: idx,
                        magnitude: -pa,
                    });
                }
            }
            for (idx, &la) in self.lambdas.iter().enumerate() {
                if la <= CPTP_TOL {
                    violations.push(Violation {
                        constraint: "lambda > 0".into(),
                        index: idx,
                        magnitude: -la,
                    });
                }
            }
        }
        ValidationReport { mode, violations }
    }

    pub fn is_cptp(&self) -> bool {
        self.validate(ValidationMode::Cptp).passed()
    }

    pub fn satisfies_assumption4(&self) -> bool {
        self.validate(ValidationMode::Assumption4).passed()
    }

    pub fn min_error_rate(&self) -> f64 {
        self.error_rates().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ChannelFile {
            n: self.n,
            basis: "lambda".into(),
            values: self.lambdas.clone(),
        })
        .unwrap()
    }

    pub fn from_json(text: &str) -> Result<PauliChannel, ChannelError> {
        let file: ChannelFile = serde_json::from_str(text)?;
        let ch = match file.basis.as_str() {
            "lambda" => PauliChannel::from_lambdas(file.values)?,
            "p" => PauliChannel::from_error_rates(file.values)?,
            other => return Err(ChannelError::BadBasis(other.to_string())),
        };
        if ch.n() != file.n {
            return Err(ChannelError::BadLength(ch.size()));
        }
        Ok(ch)
    }
}

impl PartialEq for PauliChannel {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.lambdas == other.lambdas
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelFile {
    n: usize,
    basis: String,
    values: Vec<f64>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationMode {
    Cptp,
    Assumption4,
}

#[derive(Clone, Debug, Serialize)]
pub struct Violation {
    pub constraint: String,
    pub index: usize,
    pub magnitude: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub mode: ValidationMode,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A full noise model: SPAM channels plus one Pauli channel per gate,
/// applied before the ideal gate.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseModel {
    pub sp_noise: PauliChannel,
    pub meas_noise: PauliChannel,
    pub gate_noise: BTreeMap<String, PauliChannel>,
}

impl NoiseModel {
    pub fn new(
        sp_noise: PauliChannel,
        meas_noise: PauliChannel,
        gate_noise: BTreeMap<String, PauliChannel>,
    ) -> Result<NoiseModel, ChannelError> {
        let n = sp_noise.n();
        for ch in std::iter::once(&meas_noise).chain(gate_noise.values()) {
            if ch.n() != n {
                return Err(ChannelError::DimensionMismatch(n, ch.n()));
            }
        }
        Ok(NoiseModel { sp_noise, meas_noise, gate_noise })
    }

    pub fn noiseless(n: usize, gate_names: &[&str]) -> NoiseModel {
        NoiseModel {
            sp_noise: PauliChannel::identity(n),
            meas_noise: PauliChannel::identity(n),
            gate_noise: gate_names
                .iter()
                .map(|&g| (g.to_string(), PauliChannel::identity(n)))
                .collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.sp_noise.n()
    }

    pub fn gate(&self, name: &str) -> Result<&PauliChannel, ChannelError> {
        self.gate_noise.get(name).ok_or_else(|| ChannelError::MissingGate(name.to_string()))
    }

    /// Minimum Pauli error rate across SPAM and all gate channels; sets the
    /// gauge validity window.
    pub fn min_error_rate(&self) -> f64 {
        let mut m = self.sp_noise.min_error_rate().min(self.meas_noise.min_error_rate());
        for ch in self.gate_noise.values() {
            m = m.min(ch.min_error_rate());
        }
        m
    }

    pub fn validate(&self, mode: ValidationMode) -> Vec<(String, ValidationReport)> {
        let mut out = vec![
            ("sp".to_string(), self.sp_noise.validate(mode)),
            ("meas".to_string(), self.meas_noise.validate(mode)),
        ];
        for (name, ch) in &self.gate_noise {
            out.push((format!("gate:{name}"), ch.validate(mode)));
        }
        out
    }

    pub fn is_valid(&self, mode: ValidationMode) -> bool {
        self.validate(mode).iter().all(|(_, r)| r.passed())
    }

    /// Log fidelities flattened gate-major, Pauli-index minor, with the
    /// gates taken in the given order. This matches the pattern-transfer
    /// graph's canonical edge order.
    pub fn log_fidelities(&self, gate_order: &[&str]) -> Result<Vec<f64>, ChannelError> {
        let mut out = Vec::with_capacity(gate_order.len() << (2 * self.n()));
        for &name in gate_order {
            let ch = self.gate(name)?;
            out.extend(ch.lambdas().iter().map(|l| l.ln()));
        }
        Ok(out)
    }

    pub fn to_json(&self) -> String {
        let gates: BTreeMap<&String, serde_json::Value> = self
            .gate_noise
            .iter()
            .map(|(name, ch)| {
                (name, serde_json::json!({"n": ch.n(), "basis": "lambda", "values": ch.lambdas()}))
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "n": self.n(),
            "sp": {"n": self.n(), "basis": "lambda", "values": self.sp_noise.lambdas()},
            "meas": {"n": self.n(), "basis": "lambda", "values": self.meas_noise.lambdas()},
            "gates": gates,
        }))
        .unwrap()
    }

    pub fn from_json(text: &str) -> Result<NoiseModel, ChannelError> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct ModelFile {
            n: usize,
            sp: ChannelFile,
            meas: ChannelFile,
            gates: BTreeMap<String, ChannelFile>,
        }
        let file: ModelFile = serde_json::from_str(text)?;
        let build = |cf: ChannelFile| -> Result<PauliChannel, ChannelError> {
            let ch = match cf.basis.as_str() {
                "lambda" => PauliChannel::from_lambdas(cf.values)?,
                "p" => PauliChannel::from_error_rates(cf.values)?,
                other => return Err(ChannelError::BadBasis(other.to_string())),
            };
            if ch.n() != file.n {
                return Err(ChannelError::DimensionMismatch(file.n, ch.n()));
            }
            Ok(ch)
        };
        let sp = build(file.sp)?;
        let meas = build(file.meas)?;
        let gate_noise = file
            .gates
            .into_iter()
            .map(|(name, cf)| Ok((name, build(cf)?)))
            .collect::<Result<BTreeMap<_, _>, ChannelError>>()?;
        NoiseModel::new(sp, meas, gate_noise)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::symplectic_idx;
    use proptest::prelude::*;

    /// Independent O(16^n) oracle for the transform.
    fn naive_wht(values: &[f64]) -> Vec<f64> {
        let len = values.len();
        (0..len)
            .map(|b| {
                (0..len)
                    .map(|a| {
                        let s = if symplectic_idx(a as u64, b as u64) == 1 { -1.0 } else { 1.0 };
                        s * values[a]
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn point_mass_on_identity_is_noiseless() {
        let mut p = vec![0.0; 16];
        p[0] = 1.0;
        let lambda = wht_p_to_lambda(&p).unwrap();
        assert!(lambda.iter().all(|&l| (l - 1.0).abs() < 1e-15));
    }

    #[test]
    fn depolarizing_lambda_matches_direct_sum() {
        let q = 0.37;
        let p = vec![1.0 - 3.0 * q / 4.0, q / 4.0, q / 4.0, q / 4.0];
        let lambda = wht_p_to_lambda(&p).unwrap();
        // Direct 4-term summation, index order I, X, Z, Y.
        for b in 1..4 {
            assert!((lambda[b] - (1.0 - q)).abs() < 1e-12, "b={b}");
        }
        assert!((lambda[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn wht_round_trip() {
        let p: Vec<f64> = (0..64).map(|i| 1.0 / (i as f64 + 2.0)).collect();
        let lambda = wht_p_to_lambda(&p).unwrap();
        let back = wht_lambda_to_p(&lambda).unwrap();
        for (a, b) in p.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn fast_wht_matches_naive_oracle() {
        for n in 1..=3usize {
            let len = 1 << (2 * n);
            let values: Vec<f64> = (0..len)
                .map(|i| ((i as u64 * 2654435761 + 12345) % 1000) as f64 / 999.0 - 0.3)
                .collect();
            let fast = wht_p_to_lambda(&values).unwrap();
            let naive = naive_wht(&values);
            for (a, b) in fast.iter().zip(&naive) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lambda_all_ones_is_point_mass() {
        let lambda = vec![1.0; 16];
        let p = wht_lambda_to_p(&lambda).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(p[1..].iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn error_rates_sum_to_one() {
        let ch = PauliChannel::depolarizing(2, 0, 0.02)
            .compose(&PauliChannel::depolarizing(2, 1, 0.05))
            .unwrap();
        let total: f64 = ch.error_rates().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inflated_lambda_fails_cptp() {
        let mut lambdas = vec![1.0; 16];
        lambdas[5] = 1.2; // XX
        let ch = PauliChannel::from_lambdas(lambdas).unwrap();
        let report = ch.validate(ValidationMode::Cptp);
        assert!(!report.passed());
        assert!(report.violations.iter().any(|v| v.constraint == "p >= 0"));
        // lambda < -1 in one entry also breaks positivity.
        let mut lambdas = vec![1.0; 16];
        lambdas[3] = -1.5;
        assert!(!PauliChannel::from_lambdas(lambdas).unwrap().is_cptp());
    }

    #[test]
    fn identity_channel_fails_assumption4() {
        let ch = PauliChannel::identity(1);
        assert!(ch.is_cptp());
        let report = ch.validate(ValidationMode::Assumption4);
        assert!(!report.passed());
        assert!(report.violations.iter().any(|v| v.constraint == "p > 0"));
        assert!(PauliChannel::depolarizing(1, 0, 0.01).satisfies_assumption4());
    }

    #[test]
    fn bit_flip_fidelities() {
        let ch = PauliChannel::bit_flip(1, 0, 0.1);
        // Order I, X, Z, Y: X commutes with the error, Z and Y do not.
        assert_eq!(ch.lambdas(), &[1.0, 1.0, 0.8, 0.8]);
        let two = PauliChannel::bit_flip_each(&[0.1, 0.0]);
        assert!((two.lambda(2) - 0.8).abs() < 1e-15); // ZI
        assert!((two.lambda(2 * 4) - 1.0).abs() < 1e-15); // IZ
    }

    #[test]
    fn channel_json_round_trip() {
        let ch = PauliChannel::depolarizing(2, 1, 0.03);
        let back = PauliChannel::from_json(&ch.to_json()).unwrap();
        assert_eq!(ch, back);
        let p_text = r#"{"n":1,"basis":"p","values":[0.97,0.01,0.01,0.01]}"#;
        let ch = PauliChannel::from_json(p_text).unwrap();
        // lambda_X = 1 - 2(p_Z + p_Y).
        assert!((ch.lambda(1) - 0.96).abs() < 1e-12);
        assert!(PauliChannel::from_json(r#"{"n":1,"basis":"q","values":[1,0,0,0]}"#).is_err());
        assert!(PauliChannel::from_json(r#"{"n":2,"basis":"lambda","values":[1,0,0,0]}"#).is_err());
    }

    proptest! {
        #[test]
        fn composition_multiplies_fidelities(
            qs in proptest::collection::vec(0.0f64..0.5, 4),
        ) {
            let a = PauliChannel::depolarizing(1, 0, qs[0])
                .compose(&PauliChannel::bit_flip(1, 0, qs[1])).unwrap();
            let b = PauliChannel::depolarizing(1, 0, qs[2])
                .compose(&PauliChannel::bit_flip(1, 0, qs[3])).unwrap();
            let ab = a.compose(&b).unwrap();
            for idx in 0..4 {
                prop_assert!((ab.lambda(idx) - a.lambda(idx) * b.lambda(idx)).abs() < 1e-12);
            }
        }

        #[test]
        fn wht_is_self_inverse_up_to_scale(values in proptest::collection::vec(-1.0f64..1.0, 16)) {
            let once = wht_p_to_lambda(&values).unwrap();
            let twice = wht_lambda_to_p(&once).unwrap();
            for (a, b) in values.iter().zip(&twice) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
