//! Shot-level simulation of the cycle-benchmarking protocol family.
//!
//! Two engines share one circuit layout:
//!
//! - `pauli_fast` propagates a single signed Pauli through the twirled
//!   circuit, multiplying fidelities along the trajectory. Exact for
//!   Pauli-diagonal noise, O(depth) per circuit.
//! - `ptm_dense` propagates the full Pauli-coefficient vector with dense
//!   transfer matrices, supporting non-Pauli noise (amplitude damping,
//!   arbitrary Kraus sets) under explicit randomized compiling. Ground
//!   truth for everything, n <= 3.
//!
//! Randomized compiling is implemented as uniformly random Pauli frames:
//! one twirl before every gate layer plus a final one before measurement,
//! folded in as sign flips, with the ideal-circuit sign divided out of
//! every recorded mean ("sign correction").

use std::collections::BTreeMap;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{NoiseModel, PauliChannel, ValidationMode};
use crate::clifford::{closing_layer, layer_gate, single_qubit_cliffords, CliffordGate, GateSet};
use crate::graph::PatternGraph;
use crate::pauli::{symplectic_idx, PauliOp};
use crate::ptm::{channels, kraus_to_ptm, CMat, CliffordTable, PauliVec, Ptm, MAX_DENSE_QUBITS};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("gate {0:?} is not in the gate set")]
    UnknownGate(String),
    #[error("noise model is not CPTP: first violation in channel {0}")]
    InvalidModel(String),
    #[error("orbit not closed: once {0} is mapped to {1} it cannot be rotated back by a single-qubit layer")]
    OrbitNotClosed(String, String),
    #[error("depth list is empty or not matched to the orbit period {0}")]
    BadDepths(u32),
    #[error("pauli_fast engine requires Pauli-diagonal noise; {0} has a non-diagonal spec")]
    PauliFastNeedsDiagonal(String),
    #[error("dense engine requires n <= {MAX_DENSE_QUBITS}, got {0}")]
    TooLarge(usize),
    #[error("trajectory of {0} does not end on the recorded measurement Pauli {1}")]
    TrajectoryMismatch(String, String),
    #[error("planner could not span the cycle space; missing {0} dimensions")]
    IncompleteCoverage(usize),
    #[error("invalid Pauli: {0}")]
    Pauli(#[from] crate::pauli::PauliError),
    #[error("invalid Kraus or PTM data: {0}")]
    Ptm(#[from] crate::ptm::PtmError),
    #[error("channel error: {0}")]
    Channel(#[from] crate::channel::ChannelError),
    #[error("clifford error: {0}")]
    Clifford(#[from] crate::clifford::CliffordError),
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed CSV at line {0}: {1}")]
    Csv(usize, String),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    PauliFast,
    PtmDense,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    Standard,
    Interleaved,
    /// Multi-step cycle circuit with per-step closing layers.
    Cycle,
    /// Intercept CB, prepared family (depths l*m0 + 1, measure G(a)).
    InterceptA,
    /// Intercept CB, reference family (depths l*m0).
    InterceptB,
}

impl Protocol {
    pub fn as_str(&self) -> &'static str {
        match self {
            Protocol::Standard => "standard",
            Protocol::Interleaved => "interleaved",
            Protocol::Cycle => "cycle",
            Protocol::InterceptA => "intercept_a",
            Protocol::InterceptB => "intercept_b",
        }
    }

    fn parse(s: &str) -> Option<Protocol> {
        Some(match s {
            "standard" => Protocol::Standard,
            "interleaved" => Protocol::Interleaved,
            "cycle" => Protocol::Cycle,
            "intercept_a" => Protocol::InterceptA,
            "intercept_b" => Protocol::InterceptB,
            _ => return None,
        })
    }
}

/// One cycled step: a gate-set gate followed by an optional noiseless
/// single-qubit closing layer (library indices per qubit).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub gate: usize,
    pub layer: Option<Vec<usize>>,
}

/// A fully resolved CB run: what to prepare, how to cycle, where to fit.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunSpec {
    pub run_id: String,
    pub protocol: Protocol,
    pub prepare: String,
    pub measure: String,
    pub steps: Vec<Step>,
    /// Raw gate-layer counts per point.
    pub depths: Vec<u32>,
    /// Fit abscissa per point (depth for decay runs, l for intercept).
    pub xs: Vec<f64>,
    /// Edge functional of one closed period: (gate name, Pauli, coeff).
    pub functional: Vec<(String, String, f64)>,
    /// Steps per closed period (1 for standard/interleaved).
    pub period: u32,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CbParams {
    pub circuits: u32,
    /// 0 means infinite-shot mode: record exact expectation values.
    pub shots: u32,
    pub seed: u64,
    pub engine: Engine,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub run_id: String,
    pub protocol: Protocol,
    pub prepare: String,
    pub measure: String,
    pub gate_names: Vec<String>,
    pub layer_names: Vec<Option<String>>,
    pub period: u32,
    pub functional: Vec<(String, String, f64)>,
    pub depths: Vec<u32>,
    pub xs: Vec<f64>,
    pub circuits: u32,
    pub shots: u32,
    pub seed: u64,
    pub engine: Engine,
    pub config_hash: String,
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CbRow {
    pub depth: u32,
    pub x: f64,
    pub circuit: u32,
    /// Ideal-circuit sign that was divided out of the mean.
    pub sign: i8,
    pub shots: u32,
    /// Sign-corrected estimate of the measured expectation value.
    pub mean: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CbRun {
    pub meta: RunMeta,
    pub rows: Vec<CbRow>,
}

impl CbRun {
    /// Per-depth circuit means grouped in row order.
    pub fn means_by_depth(&self) -> Vec<(u32, f64, Vec<f64>)> {
        let mut out: Vec<(u32, f64, Vec<f64>)> = Vec::new();
        for row in &self.rows {
            match out.iter_mut().find(|(d, _, _)| *d == row.depth) {
                Some((_, _, v)) => v.push(row.mean),
                None => out.push((row.depth, row.x, vec![row.mean])),
            }
        }
        out
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, Default)]
pub struct CbDataset {
    pub runs: Vec<CbRun>,
}

impl CbDataset {
    pub fn merge(&mut self, other: CbDataset) {
        self.runs.extend(other.runs);
    }

    pub fn run(&self, run_id: &str) -> Option<&CbRun> {
        self.runs.iter().find(|r| r.meta.run_id == run_id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    pub fn from_json(text: &str) -> Result<CbDataset, SimError> {
        Ok(serde_json::from_str(text)?)
    }

    /// One row per circuit measurement.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("run_id,protocol,prepare,measure,depth,x,circuit,sign,shots,mean\n");
        for run in &self.runs {
            for row in &run.rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{:.17e}\n",
                    run.meta.run_id,
                    run.meta.protocol.as_str(),
                    run.meta.prepare,
                    run.meta.measure,
                    row.depth,
                    row.x,
                    row.circuit,
                    row.sign,
                    row.shots,
                    row.mean
                ));
            }
        }
        out
    }

    /// Parses the CSV row format back into runs. Row-level data only; the
    /// JSON form is the authoritative serialization.
    pub fn from_csv(text: &str) -> Result<CbDataset, SimError> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| SimError::Csv(0, "empty file".into()))?;
        if header.trim() != "run_id,protocol,prepare,measure,depth,x,circuit,sign,shots,mean" {
            return Err(SimError::Csv(1, "unrecognized header".into()));
        }
        let mut runs: Vec<CbRun> = Vec::new();
        for (lineno, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 10 {
                return Err(SimError::Csv(lineno + 1, format!("expected 10 fields, got {}", fields.len())));
            }
            let bad = |what: &str| SimError::Csv(lineno + 1, format!("bad {what} field"));
            let protocol = Protocol::parse(fields[1]).ok_or_else(|| bad("protocol"))?;
            let _prepare: PauliOp = fields[2].parse().map_err(|_| bad("prepare"))?;
            let _measure: PauliOp = fields[3].parse().map_err(|_| bad("measure"))?;
            let row = CbRow {
                depth: fields[4].parse().map_err(|_| bad("depth"))?,
                x: fields[5].parse().map_err(|_| bad("x"))?,
                circuit: fields[6].parse().map_err(|_| bad("circuit"))?,
                sign: fields[7].parse().map_err(|_| bad("sign"))?,
                shots: fields[8].parse().map_err(|_| bad("shots"))?,
                mean: fields[9].parse().map_err(|_| bad("mean"))?,
            };
            if row.sign != 1 && row.sign != -1 {
                return Err(bad("sign"));
            }
            if !row.mean.is_finite() || row.mean.abs() > 1.0 + 1e-9 {
                return Err(bad("mean"));
            }
            match runs.iter_mut().find(|r| r.meta.run_id == fields[0]) {
                Some(run) => run.rows.push(row),
                None => runs.push(CbRun {
                    meta: RunMeta {
                        run_id: fields[0].to_string(),
                        protocol,
                        prepare: fields[2].to_string(),
                        measure: fields[3].to_string(),
                        gate_names: Vec::new(),
                        layer_names: Vec::new(),
                        period: 1,
                        functional: Vec::new(),
                        depths: Vec::new(),
                        xs: Vec::new(),
                        circuits: 0,
                        shots: row.shots,
                        seed: 0,
                        engine: Engine::PauliFast,
                        config_hash: String::new(),
                    },
                    rows: vec![row],
                }),
            }
        }
        Ok(CbDataset { runs })
    }
}

// Deterministic seed derivation: a splitmix chain keyed by
// (seed, run id, depth, circuit) for twirls and additionally the shot
// counter for outcomes.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

fn mix(h: u64, v: u64) -> u64 {
    splitmix64(h ^ v.wrapping_mul(0x9E3779B97F4A7C15))
}

fn fnv1a(text: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / 9007199254740992.0)
}

/// Noise description consumed by the dense engine; the fast engine accepts
/// only the Diagonal variant.
#[derive(Clone, Debug)]
pub enum GateNoiseKind {
    Diagonal(PauliChannel),
    PerQubit(Vec<Ptm>),
    Dense(Ptm),
}

#[derive(Clone, Debug)]
pub struct ResolvedNoise {
    pub n: usize,
    pub sp: PauliChannel,
    pub meas: PauliChannel,
    /// Indexed by gate-set position.
    pub gates: Vec<GateNoiseKind>,
}

impl ResolvedNoise {
    pub fn from_model(model: &NoiseModel, gates: &GateSet) -> Result<ResolvedNoise, SimError> {
        for (name, report) in model.validate(ValidationMode::Cptp) {
            if !report.passed() {
                return Err(SimError::InvalidModel(name));
            }
        }
        let gate_kinds = gates
            .gates()
            .iter()
            .map(|g| {
                model
                    .gate_noise
                    .get(g.name())
                    .map(|ch| GateNoiseKind::Diagonal(ch.clone()))
                    .ok_or_else(|| SimError::UnknownGate(g.name().to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(ResolvedNoise {
            n: model.n(),
            sp: model.sp_noise.clone(),
            meas: model.meas_noise.clone(),
            gates: gate_kinds,
        })
    }

    fn diagonal(&self, idx: usize) -> Result<&PauliChannel, SimError> {
        match &self.gates[idx] {
            GateNoiseKind::Diagonal(ch) => Ok(ch),
            _ => Err(SimError::PauliFastNeedsDiagonal(format!("gate #{idx}"))),
        }
    }
}

/// CPTP noise specification for the dense engine: per-gate named channels,
/// explicit Kraus sets, or Pauli channels, plus bit-flip SPAM.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CptpNoiseSpec {
    pub n: usize,
    #[serde(default)]
    pub gates: BTreeMap<String, GateNoiseSpec>,
    #[serde(default)]
    pub sp_bitflip: Vec<f64>,
    #[serde(default)]
    pub meas_bitflip: Vec<f64>,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GateNoiseSpec {
    /// One named channel per qubit, e.g. [{"amplitude_damping": 0.05}, ..].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_qubit: Option<Vec<NamedChannel>>,
    /// Full n-qubit Kraus set: row-major complex matrices as `(re, im)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kraus: Option<Vec<Vec<Vec<(f64, f64)>>>>,
    /// Pauli channel in the lambda basis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
}

#[derive(Copy, Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedChannel {
    AmplitudeDamping(f64),
    BitFlip(f64),
    Depolarizing(f64),
    Identity,
}

impl NamedChannel {
    fn ptm(&self) -> Ptm {
        match *self {
            NamedChannel::AmplitudeDamping(g) => channels::amplitude_damping(g),
            NamedChannel::BitFlip(q) => channels::bit_flip(q),
            NamedChannel::Depolarizing(q) => channels::depolarizing(q),
            NamedChannel::Identity => Ptm::identity(4),
        }
    }
}

impl CptpNoiseSpec {
    pub fn from_json(text: &str) -> Result<CptpNoiseSpec, SimError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).unwrap()
    }

    pub fn resolve(&self, gates: &GateSet) -> Result<ResolvedNoise, SimError> {
        let n = self.n;
        if n > MAX_DENSE_QUBITS {
            return Err(SimError::TooLarge(n));
        }
        let mut gate_kinds = Vec::new();
        for g in gates.gates() {
            let kind = match self.gates.get(g.name()) {
                None => GateNoiseKind::Diagonal(PauliChannel::identity(n)),
                Some(spec) => match (&spec.per_qubit, &spec.kraus, &spec.lambdas) {
                    (Some(named), None, None) => {
                        if named.len() != n {
                            return Err(SimError::InvalidModel(format!(
                                "gate:{}: per_qubit wants {} channels",
                                g.name(),
                                n
                            )));
                        }
                        GateNoiseKind::PerQubit(named.iter().map(NamedChannel::ptm).collect())
                    }
                    (None, Some(kraus), None) => {
                        let mats = kraus
                            .iter()
                            .map(|rows| CMat::from_rows(rows))
                            .collect::<Result<Vec<_>, _>>()?;
                        GateNoiseKind::Dense(kraus_to_ptm(n, &mats)?)
                    }
                    (None, None, Some(lambdas)) => {
                        let ch = PauliChannel::from_lambdas(lambdas.clone())?;
                        if ch.n() != n {
                            return Err(SimError::InvalidModel(format!(
                                "gate:{}: lambda vector length",
                                g.name()
                            )));
                        }
                        GateNoiseKind::Diagonal(ch)
                    }
                    _ => {
                        return Err(SimError::InvalidModel(format!(
                            "gate:{}: give exactly one of per_qubit/kraus/lambdas",
                            g.name()
                        )))
                    }
                },
            };
            gate_kinds.push(kind);
        }
        let spam = |rates: &[f64], which: &str| -> Result<PauliChannel, SimError> {
            if rates.is_empty() {
                Ok(PauliChannel::identity(n))
            } else if rates.len() == n {
                Ok(PauliChannel::bit_flip_each(rates))
            } else {
                Err(SimError::InvalidModel(format!("{which} bit-flip rate count")))
            }
        };
        Ok(ResolvedNoise {
            n,
            sp: spam(&self.sp_bitflip, "sp")?,
            meas: spam(&self.meas_bitflip, "meas")?,
            gates: gate_kinds,
        })
    }

    /// Ground-truth Pauli-twirled fidelities of one gate's noise.
    pub fn twirled_lambdas(&self, gates: &GateSet, gate: &str) -> Result<PauliChannel, SimError> {
        let resolved = self.resolve(gates)?;
        let (gi, _) =
            gates.by_name(gate).ok_or_else(|| SimError::UnknownGate(gate.to_string()))?;
        Ok(match &resolved.gates[gi] {
            GateNoiseKind::Diagonal(ch) => ch.clone(),
            GateNoiseKind::PerQubit(ptms) => {
                crate::ptm::pauli_twirl_diagonal(&crate::ptm::kron_ptm(ptms))?
            }
            GateNoiseKind::Dense(ptm) => crate::ptm::pauli_twirl_diagonal(ptm)?,
        })
    }
}

struct CompiledStep {
    gate: usize,
    gate_table: CliffordTable,
    layer_table: Option<CliffordTable>,
}

struct CompiledRun {
    prepare: PauliOp,
    measure_idx: u64,
    steps: Vec<CompiledStep>,
}

fn compile_run(gates: &GateSet, spec: &RunSpec) -> Result<CompiledRun, SimError> {
    let lib = single_qubit_cliffords();
    let prepare: PauliOp = spec.prepare.parse()?;
    let measure: PauliOp = spec.measure.parse()?;
    if spec.depths.is_empty() || spec.depths.len() != spec.xs.len() {
        return Err(SimError::BadDepths(spec.period));
    }
    let steps = spec
        .steps
        .iter()
        .map(|s| {
            let gate = gates
                .gates()
                .get(s.gate)
                .ok_or_else(|| SimError::UnknownGate(format!("#{}", s.gate)))?;
            if let Some(l) = &s.layer {
                if l.len() != gate.n() || l.iter().any(|&i| i >= lib.len()) {
                    return Err(SimError::InvalidModel(format!(
                        "step layer wants {} library indices below {}",
                        gate.n(),
                        lib.len()
                    )));
                }
            }
            Ok(CompiledStep {
                gate: s.gate,
                gate_table: CliffordTable::new(gate),
                layer_table: s.layer.as_ref().map(|l| CliffordTable::new(&layer_gate(&lib, l))),
            })
        })
        .collect::<Result<Vec<_>, SimError>>()?;
    // Every recorded depth must land the prepared Pauli on the recorded
    // measurement Pauli.
    for &d in &spec.depths {
        let mut cur = prepare.index();
        for k in 0..d as usize {
            let step = &steps[k % steps.len()];
            cur = step.gate_table.perm[cur as usize] as u64;
            if let Some(layer) = &step.layer_table {
                cur = layer.perm[cur as usize] as u64;
            }
        }
        if cur != measure.index() {
            return Err(SimError::TrajectoryMismatch(spec.prepare.clone(), spec.measure.clone()));
        }
    }
    Ok(CompiledRun { prepare, measure_idx: measure.index(), steps })
}

fn simulate_run(
    noise: &ResolvedNoise,
    gates: &GateSet,
    spec: &RunSpec,
    params: &CbParams,
) -> Result<CbRun, SimError> {
    let compiled = compile_run(gates, spec)?;
    let n = noise.n;
    if gates.n() != n {
        return Err(SimError::InvalidModel("gate set / noise qubit mismatch".into()));
    }
    if params.engine == Engine::PtmDense && n > MAX_DENSE_QUBITS {
        return Err(SimError::TooLarge(n));
    }
    if params.engine == Engine::PauliFast {
        for i in 0..gates.len() {
            noise.diagonal(i)?;
        }
    }
    let size = 1u64 << (2 * n);
    // The twirl stream depends on (seed, run id, depth, circuit) only, so
    // both engines see identical circuits.
    let run_key = mix(fnv1a(&spec.run_id), params.seed);
    let mut rows = Vec::with_capacity(spec.depths.len() * params.circuits as usize);
    for (di, &depth) in spec.depths.iter().enumerate() {
        let x = spec.xs[di];
        for circuit in 0..params.circuits {
            let circuit_key = mix(mix(run_key, depth as u64), circuit as u64);
            let mut rng = ChaCha12Rng::seed_from_u64(circuit_key);
            let twirls: Vec<u64> = (0..=depth).map(|_| rng.random_range(0..size)).collect();

            // Ideal trajectory sign: the correction to divide out.
            let mut cur = compiled.prepare.index();
            let mut ideal_sign = 1.0f64;
            for k in 0..depth as usize {
                let step = &compiled.steps[k % compiled.steps.len()];
                if symplectic_idx(twirls[k], cur) == 1 {
                    ideal_sign = -ideal_sign;
                }
                ideal_sign *= step.gate_table.sign[cur as usize];
                cur = step.gate_table.perm[cur as usize] as u64;
                if let Some(layer) = &step.layer_table {
                    ideal_sign *= layer.sign[cur as usize];
                    cur = layer.perm[cur as usize] as u64;
                }
            }
            if symplectic_idx(twirls[depth as usize], cur) == 1 {
                ideal_sign = -ideal_sign;
            }
            debug_assert_eq!(cur, compiled.measure_idx);

            let measured = match params.engine {
                Engine::PauliFast => {
                    let mut cur = compiled.prepare.index();
                    let mut sign = 1.0f64;
                    let mut val = noise.sp.lambda(cur);
                    for k in 0..depth as usize {
                        let step = &compiled.steps[k % compiled.steps.len()];
                        if symplectic_idx(twirls[k], cur) == 1 {
                            sign = -sign;
                        }
                        val *= noise.diagonal(step.gate)?.lambda(cur);
                        sign *= step.gate_table.sign[cur as usize];
                        cur = step.gate_table.perm[cur as usize] as u64;
                        if let Some(layer) = &step.layer_table {
                            sign *= layer.sign[cur as usize];
                            cur = layer.perm[cur as usize] as u64;
                        }
                    }
                    if symplectic_idx(twirls[depth as usize], cur) == 1 {
                        sign = -sign;
                    }
                    val *= noise.meas.lambda(cur);
                    sign * val
                }
                Engine::PtmDense => {
                    let mut state = PauliVec::eigenstate(&compiled.prepare);
                    state.apply_pauli_channel(&noise.sp);
                    for k in 0..depth as usize {
                        let step = &compiled.steps[k % compiled.steps.len()];
                        state.apply_pauli_gate(twirls[k]);
                        match &noise.gates[step.gate] {
                            GateNoiseKind::Diagonal(ch) => state.apply_pauli_channel(ch),
                            GateNoiseKind::PerQubit(ptms) => {
                                for (q, ptm) in ptms.iter().enumerate() {
                                    state.apply_1q_ptm(q, ptm);
                                }
                            }
                            GateNoiseKind::Dense(ptm) => state.apply_ptm(ptm),
                        }
                        state.apply_clifford(&step.gate_table);
                        if let Some(layer) = &step.layer_table {
                            state.apply_clifford(layer);
                        }
                    }
                    state.apply_pauli_gate(twirls[depth as usize]);
                    state.apply_pauli_channel(&noise.meas);
                    state.expval(compiled.measure_idx)
                }
            };

            let mean = if params.shots == 0 {
                ideal_sign * measured
            } else {
                let p_plus = (0.5 * (1.0 + measured)).clamp(0.0, 1.0);
                let mut plus = 0u64;
                for shot in 0..params.shots {
                    if unit_f64(mix(circuit_key, 0x5D5C_0000_0000_0000 ^ shot as u64)) < p_plus {
                        plus += 1;
                    }
                }
                ideal_sign * (2.0 * plus as f64 / params.shots as f64 - 1.0)
            };
            rows.push(CbRow {
                depth,
                x,
                circuit,
                sign: if ideal_sign >= 0.0 { 1 } else { -1 },
                shots: params.shots,
                mean,
            });
        }
    }
    let lib = single_qubit_cliffords();
    let meta = RunMeta {
        run_id: spec.run_id.clone(),
        protocol: spec.protocol,
        prepare: spec.prepare.clone(),
        measure: spec.measure.clone(),
        gate_names: spec.steps.iter().map(|s| gates.gate(s.gate).name().to_string()).collect(),
        layer_names: spec
            .steps
            .iter()
            .map(|s| s.layer.as_ref().map(|l| layer_gate(&lib, l).name().to_string()))
            .collect(),
        period: spec.period,
        functional: spec.functional.clone(),
        depths: spec.depths.clone(),
        xs: spec.xs.clone(),
        circuits: params.circuits,
        shots: params.shots,
        seed: params.seed,
        engine: params.engine,
        config_hash: format!("{:016x}", fnv1a(&format!("{spec:?}|{params:?}"))),
    };
    Ok(CbRun { meta, rows })
}

pub fn run_specs(
    noise: &ResolvedNoise,
    gates: &GateSet,
    specs: &[RunSpec],
    params: &CbParams,
) -> Result<CbDataset, SimError> {
    let runs = specs
        .iter()
        .map(|spec| simulate_run(noise, gates, spec, params))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CbDataset { runs })
}

/// Standard CB on one Pauli: repeated applications of a single gate.
pub fn run_standard_cb(
    model: &NoiseModel,
    gates: &GateSet,
    gate: &str,
    pauli: &str,
    depths: &[u32],
    params: &CbParams,
) -> Result<CbDataset, SimError> {
    let noise = ResolvedNoise::from_model(model, gates)?;
    let spec = standard_spec(gates, gate, pauli, depths)?;
    run_specs(&noise, gates, &[spec], params)
}

/// Interleaved CB: a closing single-qubit layer after every gate. With
/// `layer` = None the layer is constructed automatically; rejects Paulis
/// whose pattern changes (the orbit cannot be rotated closed).
pub fn run_interleaved_cb(
    model: &NoiseModel,
    gates: &GateSet,
    gate: &str,
    pauli: &str,
    layer: Option<Vec<usize>>,
    depths: &[u32],
    params: &CbParams,
) -> Result<CbDataset, SimError> {
    let noise = ResolvedNoise::from_model(model, gates)?;
    let spec = interleaved_spec(gates, gate, pauli, layer, depths)?;
    run_specs(&noise, gates, &[spec], params)
}

/// Intercept CB: both depth families for one Pauli.
pub fn run_intercept_cb(
    model: &NoiseModel,
    gates: &GateSet,
    gate: &str,
    pauli: &str,
    l_values: &[u32],
    params: &CbParams,
) -> Result<CbDataset, SimError> {
    let noise = ResolvedNoise::from_model(model, gates)?;
    let specs = intercept_specs(gates, gate, pauli, l_values)?;
    run_specs(&noise, gates, &specs, params)
}

/// Any run list under the dense engine with a general CPTP noise spec.
pub fn run_ptm_dense(
    spec: &CptpNoiseSpec,
    gates: &GateSet,
    runs: &[RunSpec],
    params: &CbParams,
) -> Result<CbDataset, SimError> {
    let noise = spec.resolve(gates)?;
    let dense_params = CbParams { engine: Engine::PtmDense, ..*params };
    run_specs(&noise, gates, runs, &dense_params)
}

// Run-spec builders.

fn orbit_period(gate: &CliffordGate, start: u64) -> u32 {
    let mut cur = gate.conjugate_index(start);
    let mut period = 1;
    while cur != start {
        cur = gate.conjugate_index(cur);
        period += 1;
    }
    period
}

/// Keeps the given depth grid where it is compatible with the orbit period,
/// otherwise scales a power-of-two ladder by the period.
fn depths_for_period(depths: &[u32], period: u32) -> Vec<u32> {
    let filtered: Vec<u32> = depths.iter().copied().filter(|d| d % period == 0 && *d > 0).collect();
    if filtered.len() >= 4 {
        filtered
    } else {
        (0..7).map(|k| period * (1 << k)).collect()
    }
}

/// Standard CB run spec; the fitted functional is the orbit sum.
pub fn standard_spec(
    gates: &GateSet,
    gate: &str,
    pauli: &str,
    depths: &[u32],
) -> Result<RunSpec, SimError> {
    let (gi, g) = gates.by_name(gate).ok_or_else(|| SimError::UnknownGate(gate.into()))?;
    let p: PauliOp = pauli.parse()?;
    let period = orbit_period(g, p.index());
    let depths = depths_for_period(depths, period);
    let mut functional = Vec::new();
    let mut cur = p.index();
    for _ in 0..period {
        functional.push((gate.to_string(), PauliOp::from_index(g.n(), cur).to_string(), 1.0));
        cur = g.conjugate_index(cur);
    }
    Ok(RunSpec {
        run_id: format!("std:{gate}:{p}"),
        protocol: Protocol::Standard,
        prepare: p.to_string(),
        measure: p.to_string(),
        steps: vec![Step { gate: gi, layer: None }],
        xs: depths.iter().map(|&d| d as f64).collect(),
        depths,
        functional,
        period,
    })
}

/// Interleaved CB run spec (single gate, closing layer, period 1).
pub fn interleaved_spec(
    gates: &GateSet,
    gate: &str,
    pauli: &str,
    layer: Option<Vec<usize>>,
    depths: &[u32],
) -> Result<RunSpec, SimError> {
    let (gi, g) = gates.by_name(gate).ok_or_else(|| SimError::UnknownGate(gate.into()))?;
    let p: PauliOp = pauli.parse()?;
    let img = g.conjugate(&p).unsigned();
    let lib = single_qubit_cliffords();
    let layer = match layer {
        Some(l) => {
            if l.len() != g.n() || l.iter().any(|&i| i >= lib.len()) {
                return Err(SimError::InvalidModel(format!(
                    "interleaving layer wants {} library indices below {}",
                    g.n(),
                    lib.len()
                )));
            }
            l
        }
        None => closing_layer(&lib, &img, &p)
            .ok_or_else(|| SimError::OrbitNotClosed(p.to_string(), img.to_string()))?,
    };
    if layer_gate(&lib, &layer).conjugate(&img).unsigned() != p.unsigned() {
        return Err(SimError::OrbitNotClosed(p.to_string(), img.to_string()));
    }
    let depths = depths_for_period(depths, 1);
    Ok(RunSpec {
        run_id: format!("int:{gate}:{p}"),
        protocol: Protocol::Interleaved,
        prepare: p.to_string(),
        measure: p.to_string(),
        steps: vec![Step { gate: gi, layer: Some(layer) }],
        xs: depths.iter().map(|&d| d as f64).collect(),
        depths,
        functional: vec![(gate.to_string(), p.to_string(), 1.0)],
        period: 1,
    })
}

/// Multi-step cycle run over a closed edge sequence; each step's closing
/// layer rotates the gate output onto the next edge's Pauli.
pub fn cycle_spec(
    gates: &GateSet,
    edges: &[(usize, u64)],
    depths: &[u32],
) -> Result<RunSpec, SimError> {
    let n = gates.n();
    let lib = single_qubit_cliffords();
    let q = edges.len() as u32;
    let mut steps = Vec::new();
    let mut functional = Vec::new();
    for (k, &(gi, a)) in edges.iter().enumerate() {
        let g = gates.gate(gi);
        let p = PauliOp::from_index(n, a);
        let img = g.conjugate(&p).unsigned();
        let next = PauliOp::from_index(n, edges[(k + 1) % edges.len()].1);
        let layer = closing_layer(&lib, &img, &next)
            .ok_or_else(|| SimError::OrbitNotClosed(p.to_string(), img.to_string()))?;
        steps.push(Step { gate: gi, layer: Some(layer) });
        functional.push((g.name().to_string(), p.to_string(), 1.0));
    }
    let depths = depths_for_period(depths, q);
    let prepare = PauliOp::from_index(n, edges[0].1);
    let run_id = format!(
        "cyc:{}",
        functional.iter().map(|(g, p, _)| format!("{g}:{p}")).collect::<Vec<_>>().join("+")
    );
    Ok(RunSpec {
        run_id,
        protocol: Protocol::Cycle,
        prepare: prepare.to_string(),
        measure: prepare.to_string(),
        steps,
        xs: depths.iter().map(|&d| d as f64).collect(),
        depths,
        functional,
        period: q,
    })
}

/// Intercept CB spec pair for one Pauli.
pub fn intercept_specs(
    gates: &GateSet,
    gate: &str,
    pauli: &str,
    l_values: &[u32],
) -> Result<Vec<RunSpec>, SimError> {
    let (gi, g) = gates.by_name(gate).ok_or_else(|| SimError::UnknownGate(gate.into()))?;
    let p: PauliOp = pauli.parse()?;
    let m0 = g.order()? as u32;
    let b = g.conjugate(&p).unsigned();
    // The slope in l is the full m0-cycle product through the orbit of a.
    let mut functional = Vec::new();
    let mut cur = g.conjugate_index(p.index());
    for _ in 0..m0 {
        functional.push((gate.to_string(), PauliOp::from_index(g.n(), cur).to_string(), 1.0));
        cur = g.conjugate_index(cur);
    }
    let xs: Vec<f64> = l_values.iter().map(|&l| l as f64).collect();
    Ok(vec![
        RunSpec {
            run_id: format!("icb:{gate}:{p}:A"),
            protocol: Protocol::InterceptA,
            prepare: p.to_string(),
            measure: b.to_string(),
            steps: vec![Step { gate: gi, layer: None }],
            depths: l_values.iter().map(|&l| l * m0 + 1).collect(),
            xs: xs.clone(),
            functional: functional.clone(),
            period: m0,
        },
        RunSpec {
            run_id: format!("icb:{gate}:{p}:B"),
            protocol: Protocol::InterceptB,
            prepare: b.to_string(),
            measure: b.to_string(),
            steps: vec![Step { gate: gi, layer: None }],
            depths: l_values.iter().map(|&l| l * m0).collect(),
            xs,
            functional,
            period: m0,
        },
    ])
}

/// Plans a run suite whose fitted functionals span the cycle space:
/// standard CB on every (gate, Pauli), interleaved CB on every
/// pattern-preserving Pauli, then rank-greedy cross-cycle runs (2-cycles,
/// then directed triangles for permutation-like gate sets).
pub fn plan_learnable_suite(
    gates: &GateSet,
    graph: &PatternGraph,
    depths: &[u32],
) -> Result<Vec<RunSpec>, SimError> {
    let n = gates.n();
    let size = 1u64 << (2 * n);
    let mut specs: Vec<RunSpec> = Vec::new();
    let mut tracker = crate::graph::RankTracker::new();
    let dense_of = |spec: &RunSpec| {
        let mut dense = vec![0.0; graph.edge_count()];
        for (gname, pstr, coeff) in &spec.functional {
            let (gi, _) = gates.by_name(gname).expect("planner gate exists");
            let p: PauliOp = pstr.parse().expect("planner Pauli is valid");
            dense[graph.edge_index(gi, p.index())] += coeff;
        }
        dense
    };
    // Rank-gated extras only; the standard and interleaved runs are kept
    // redundant on purpose (the overdetermination powers the consistency
    // checks and averages the estimates down).
    let add = |spec: RunSpec,
               tracker: &mut crate::graph::RankTracker,
               specs: &mut Vec<RunSpec>| {
        if tracker.try_add(dense_of(&spec)) {
            specs.push(spec);
        }
    };

    for g in gates.gates() {
        for a in 0..size {
            let p = PauliOp::from_index(n, a);
            let spec = standard_spec(gates, g.name(), &p.to_string(), depths)?;
            tracker.try_add(dense_of(&spec));
            specs.push(spec);
        }
    }
    for g in gates.gates() {
        for a in 0..size {
            let p = PauliOp::from_index(n, a);
            if g.conjugate(&p).pattern() != p.pattern() || g.conjugate(&p).unsigned() == p {
                continue;
            }
            let spec = interleaved_spec(gates, g.name(), &p.to_string(), None, depths)?;
            tracker.try_add(dense_of(&spec));
            specs.push(spec);
        }
    }
    let target = graph.cycle_space().dim();
    if tracker.rank() < target {
        let edges = graph.edges();
        'outer2: for (i, e1) in edges.iter().enumerate() {
            if e1.src == e1.dst {
                continue;
            }
            for (j, e2) in edges.iter().enumerate() {
                if j <= i || e2.src != e1.dst || e2.dst != e1.src {
                    continue;
                }
                add(
                    cycle_spec(gates, &[(e1.gate, e1.pauli), (e2.gate, e2.pauli)], depths)?,
                    &mut tracker,
                    &mut specs,
                );
                if tracker.rank() >= target {
                    break 'outer2;
                }
            }
        }
    }
    if tracker.rank() < target {
        let edges = graph.edges();
        'outer3: for (i, e1) in edges.iter().enumerate() {
            if e1.src == e1.dst {
                continue;
            }
            for (j, e2) in edges.iter().enumerate() {
                if e2.src != e1.dst || e2.dst == e2.src || j == i {
                    continue;
                }
                for (k, e3) in edges.iter().enumerate() {
                    if k == i || k == j || e3.src != e2.dst || e3.dst != e1.src {
                        continue;
                    }
                    add(
                        cycle_spec(
                            gates,
                            &[(e1.gate, e1.pauli), (e2.gate, e2.pauli), (e3.gate, e3.pauli)],
                            depths,
                        )?,
                        &mut tracker,
                        &mut specs,
                    );
                    if tracker.rank() >= target {
                        break 'outer3;
                    }
                }
            }
        }
    }
    if tracker.rank() < target {
        return Err(SimError::IncompleteCoverage(target - tracker.rank()));
    }
    Ok(specs)
}

/// A plain circuit (no twirling): prepare an eigenstate, apply gates and
/// single-qubit layers, measure one Pauli expectation.
#[derive(Clone, Debug)]
pub struct Circuit {
    pub prepare: PauliOp,
    pub ops: Vec<CircuitOp>,
    pub measure: PauliOp,
}

#[derive(Clone, Debug)]
pub enum CircuitOp {
    Gate(usize),
    Layer(Vec<usize>),
}

/// Exact expectation under Pauli-diagonal noise: the fidelity monomial
/// lambda^M_{b_m} * prod_k lambda^{G_k}_{b_{k-1}} * lambda^S_a along the
/// circuit's Pauli trajectory (zero when the trajectory misses the
/// measured Pauli).
pub fn expectation_pauli_fast(
    model: &NoiseModel,
    gates: &GateSet,
    circuit: &Circuit,
) -> Result<f64, SimError> {
    let noise = ResolvedNoise::from_model(model, gates)?;
    let lib = single_qubit_cliffords();
    let mut cur = circuit.prepare.unsigned();
    let mut val = noise.sp.lambda(cur.index());
    for op in &circuit.ops {
        match op {
            CircuitOp::Gate(gi) => {
                val *= noise.diagonal(*gi)?.lambda(cur.index());
                cur = gates.gate(*gi).conjugate(&cur);
            }
            CircuitOp::Layer(layer) => {
                cur = layer_gate(&lib, layer).conjugate(&cur);
            }
        }
    }
    if cur.unsigned() != circuit.measure.unsigned() {
        return Ok(0.0);
    }
    val *= noise.meas.lambda(cur.index());
    Ok(cur.sign().as_f64() * val)
}

/// Exact expectation by dense propagation; the ground-truth counterpart of
/// [`expectation_pauli_fast`].
pub fn expectation_dense(
    noise: &ResolvedNoise,
    gates: &GateSet,
    circuit: &Circuit,
) -> Result<f64, SimError> {
    if noise.n > MAX_DENSE_QUBITS {
        return Err(SimError::TooLarge(noise.n));
    }
    let lib = single_qubit_cliffords();
    let mut state = PauliVec::eigenstate(&circuit.prepare);
    state.apply_pauli_channel(&noise.sp);
    for op in &circuit.ops {
        match op {
            CircuitOp::Gate(gi) => {
                match &noise.gates[*gi] {
                    GateNoiseKind::Diagonal(ch) => state.apply_pauli_channel(ch),
                    GateNoiseKind::PerQubit(ptms) => {
                        for (q, ptm) in ptms.iter().enumerate() {
                            state.apply_1q_ptm(q, ptm);
                        }
                    }
                    GateNoiseKind::Dense(ptm) => state.apply_ptm(ptm),
                }
                state.apply_clifford(&CliffordTable::new(gates.gate(*gi)));
            }
            CircuitOp::Layer(layer) => {
                state.apply_clifford(&CliffordTable::new(&layer_gate(&lib, layer)));
            }
        }
    }
    state.apply_pauli_channel(&noise.meas);
    Ok(state.expval(circuit.measure.index()))
}
