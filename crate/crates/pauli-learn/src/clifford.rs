//! Clifford gates as binary-symplectic tableaus with sign tracking.
//!
//! A gate stores the conjugation images of the 2n generators X_j, Z_j.
//! Conjugating an arbitrary signed Pauli decomposes it over generators and
//! multiplies the images with full phase bookkeeping, so signs survive even
//! though the learnability theory only needs patterns.

use std::collections::BTreeSet;
use std::fmt;

use serde::Deserialize;
use thiserror::Error;

use crate::pauli::{mask, PauliError, PauliOp, PhasedPauli, Sign, symplectic, MAX_QUBITS};

#[derive(Debug, Error)]
pub enum CliffordError {
    #[error("qubit count {0} exceeds the supported maximum of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("expected {expected} generator images, got {got}")]
    WrongImageCount { expected: usize, got: usize },
    #[error("image {0} acts on {1} qubits, gate is on {2}")]
    ImageDimension(String, usize, usize),
    #[error("images violate the symplectic condition between {0} and {1}")]
    NotSymplectic(String, String),
    #[error("gates act on different qubit counts ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("support {0:?} is invalid for embedding a {1}-qubit gate into {2} qubits")]
    BadSupport(Vec<usize>, usize, usize),
    #[error("permutation {0:?} is not a bijection on qubits")]
    BadPermutation(Vec<usize>),
    #[error("gate order exceeded the 4^(2n) iteration cap")]
    OrderCapExceeded,
    #[error("unknown builtin gate {0:?}")]
    UnknownBuiltin(String),
    #[error("gate entry must specify either a builtin or x_images/z_images")]
    AmbiguousSpec,
    #[error("duplicate gate name {0:?} in gate set")]
    DuplicateName(String),
    #[error("gate set is empty")]
    EmptyGateSet,
    #[error("invalid Pauli string: {0}")]
    Pauli(#[from] PauliError),
    #[error("malformed gate set JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// An n-qubit Clifford gate, stored as the signed images of the generators.
#[derive(Clone, Debug, PartialEq)]
pub struct CliffordGate {
    n: usize,
    name: String,
    support: Vec<usize>,
    x_images: Vec<PauliOp>,
    z_images: Vec<PauliOp>,
}

impl CliffordGate {
    /// Builds a gate from generator images, checking the symplectic
    /// condition on every generator pair.
    pub fn from_images(
        name: impl Into<String>,
        x_images: Vec<PauliOp>,
        z_images: Vec<PauliOp>,
    ) -> Result<CliffordGate, CliffordError> {
        let n = x_images.len();
        if n > MAX_QUBITS {
            return Err(CliffordError::TooManyQubits(n));
        }
        if z_images.len() != n || n == 0 {
            return Err(CliffordError::WrongImageCount { expected: n.max(1), got: z_images.len() });
        }
        for (kind, imgs) in [("X", &x_images), ("Z", &z_images)] {
            for (j, img) in imgs.iter().enumerate() {
                if img.n() != n {
                    return Err(CliffordError::ImageDimension(
                        format!("{kind}_{j}"),
                        img.n(),
                        n,
                    ));
                }
            }
        }
        // <G(P), G(Q)> must equal <P, Q> on all generator pairs.
        for i in 0..n {
            for j in 0..n {
                if symplectic(&x_images[i], &x_images[j]) != 0 {
                    return Err(CliffordError::NotSymplectic(format!("X_{i}"), format!("X_{j}")));
                }
                if symplectic(&z_images[i], &z_images[j]) != 0 {
                    return Err(CliffordError::NotSymplectic(format!("Z_{i}"), format!("Z_{j}")));
                }
                let want = u8::from(i == j);
                if symplectic(&x_images[i], &z_images[j]) != want {
                    return Err(CliffordError::NotSymplectic(format!("X_{i}"), format!("Z_{j}")));
                }
            }
        }
        Ok(CliffordGate { n, name: name.into(), support: (0..n).collect(), x_images, z_images })
    }

    pub fn identity(n: usize) -> CliffordGate {
        let x_images = (0..n)
            .map(|j| PauliOp::from_bits(n, 1 << j, 0, Sign::Plus).unwrap())
            .collect();
        let z_images = (0..n)
            .map(|j| PauliOp::from_bits(n, 0, 1 << j, Sign::Plus).unwrap())
            .collect();
        CliffordGate { n, name: "I".into(), support: (0..n).collect(), x_images, z_images }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn with_name(mut self, name: impl Into<String>) -> CliffordGate {
        self.name = name.into();
        self
    }

    pub fn x_image(&self, j: usize) -> &PauliOp {
        &self.x_images[j]
    }

    pub fn z_image(&self, j: usize) -> &PauliOp {
        &self.z_images[j]
    }

    /// G P G-dagger with the exact sign. Panics on dimension mismatch.
    pub fn conjugate(&self, p: &PauliOp) -> PauliOp {
        assert_eq!(p.n(), self.n, "Pauli acts on {} qubits, gate on {}", p.n(), self.n);
        let mut acc = PhasedPauli::identity();
        for j in 0..self.n {
            if (p.x_bits() >> j) & 1 == 1 {
                acc.mul_right(&PhasedPauli::from_op(&self.x_images[j]));
            }
        }
        for j in 0..self.n {
            if (p.z_bits() >> j) & 1 == 1 {
                acc.mul_right(&PhasedPauli::from_op(&self.z_images[j]));
            }
        }
        // Carry over the canonical phase and sign of the input operator.
        let input = PhasedPauli::from_op(p);
        acc.phase = (acc.phase + input.phase) & 3;
        acc.into_op(self.n)
    }

    /// Conjugation on canonical indices, ignoring signs.
    pub fn conjugate_index(&self, idx: u64) -> u64 {
        self.conjugate(&PauliOp::from_index(self.n, idx)).index()
    }

    /// self after other (other applied first).
    pub fn compose(&self, other: &CliffordGate) -> Result<CliffordGate, CliffordError> {
        if self.n != other.n {
            return Err(CliffordError::DimensionMismatch(self.n, other.n));
        }
        let x_images = other.x_images.iter().map(|p| self.conjugate(p)).collect();
        let z_images = other.z_images.iter().map(|p| self.conjugate(p)).collect();
        Ok(CliffordGate {
            n: self.n,
            name: format!("{}*{}", self.name, other.name),
            support: (0..self.n).collect(),
            x_images,
            z_images,
        })
    }

    pub fn is_identity(&self) -> bool {
        (0..self.n).all(|j| {
            self.x_images[j] == PauliOp::from_bits(self.n, 1 << j, 0, Sign::Plus).unwrap()
                && self.z_images[j] == PauliOp::from_bits(self.n, 0, 1 << j, Sign::Plus).unwrap()
        })
    }

    /// Inverse gate, with signs fixed so that compose(self, inverse) is the
    /// identity tableau.
    pub fn inverse(&self) -> CliffordGate {
        let minv_rows = invert_symplectic(self);
        // bits of the preimage of generator j = column j of M^-1.
        let build = |col: usize| -> PauliOp {
            let mut bits = 0u64;
            for (r, row) in minv_rows.iter().enumerate() {
                bits |= ((row >> col) & 1) << r;
            }
            let x = bits & mask(self.n);
            let z = bits >> self.n;
            let q = PauliOp::from_bits(self.n, x, z, Sign::Plus).unwrap();
            // Fix the sign: g(q) must be exactly +generator.
            match self.conjugate(&q).sign() {
                Sign::Plus => q,
                Sign::Minus => q.negated(),
            }
        };
        let x_images = (0..self.n).map(build).collect();
        let z_images = (self.n..2 * self.n).map(build).collect();
        CliffordGate {
            n: self.n,
            name: format!("{}^-1", self.name),
            support: (0..self.n).collect(),
            x_images,
            z_images,
        }
    }

    /// Smallest m >= 1 with G^m acting as the identity on all signed
    /// generators.
    pub fn order(&self) -> Result<u64, CliffordError> {
        let cap = 1u64 << (4 * self.n.min(15));
        let mut acc = self.clone();
        let mut m = 1;
        while !acc.is_identity() {
            acc = self.compose(&acc)?;
            m += 1;
            if m > cap {
                return Err(CliffordError::OrderCapExceeded);
            }
        }
        Ok(m)
    }

    /// Embeds a k-qubit gate into n qubits, acting on the given ordered
    /// support and as the identity elsewhere.
    pub fn embed(&self, support: &[usize], n: usize) -> Result<CliffordGate, CliffordError> {
        let k = self.n;
        let distinct: BTreeSet<usize> = support.iter().copied().collect();
        if support.len() != k || distinct.len() != k || support.iter().any(|&q| q >= n) || n > MAX_QUBITS
        {
            return Err(CliffordError::BadSupport(support.to_vec(), k, n));
        }
        let scatter = |p: &PauliOp| -> PauliOp {
            let mut x = 0u64;
            let mut z = 0u64;
            for (i, &q) in support.iter().enumerate() {
                x |= ((p.x_bits() >> i) & 1) << q;
                z |= ((p.z_bits() >> i) & 1) << q;
            }
            PauliOp::from_bits(n, x, z, p.sign()).unwrap()
        };
        let mut embedded = CliffordGate::identity(n).with_name(self.name.clone());
        for (i, &q) in support.iter().enumerate() {
            embedded.x_images[q] = scatter(&self.x_images[i]);
            embedded.z_images[q] = scatter(&self.z_images[i]);
        }
        embedded.support = support.to_vec();
        Ok(embedded)
    }
}

impl fmt::Display for CliffordGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (n={})", self.name, self.n)
    }
}

/// Inverts the 2n x 2n binary symplectic matrix of a gate. Row r of the
/// result holds the (x|z) bits of the preimage of generator r.
fn invert_symplectic(g: &CliffordGate) -> Vec<u64> {
    let n = g.n;
    let dim = 2 * n;
    // rows[r] = (matrix row r) | (identity row r << dim); matrix column c is
    // the bit vector of the image of generator c.
    let bits_of = |p: &PauliOp| -> u64 { p.x_bits() | (p.z_bits() << n) };
    let mut rows = vec![0u64; dim];
    for c in 0..dim {
        let img = if c < n { bits_of(&g.x_images[c]) } else { bits_of(&g.z_images[c - n]) };
        for (r, row) in rows.iter_mut().enumerate() {
            *row |= ((img >> r) & 1) << c;
        }
    }
    for (r, row) in rows.iter_mut().enumerate() {
        *row |= 1u64 << (dim + r);
    }
    // Gauss-Jordan over GF(2); the matrix is invertible for any valid tableau.
    for col in 0..dim {
        let pivot = (col..dim)
            .find(|&r| (rows[r] >> col) & 1 == 1)
            .expect("symplectic matrix is invertible");
        rows.swap(col, pivot);
        for r in 0..dim {
            if r != col && (rows[r] >> col) & 1 == 1 {
                rows[r] ^= rows[col];
            }
        }
    }
    (0..dim).map(|r| rows[r] >> dim).collect()
}

// Gate library.

/// CNOT with control qubit 0 and target qubit 1.
pub fn cnot() -> CliffordGate {
    gate_from_strs("CNOT", &["XX", "IX"], &["ZI", "ZZ"])
}

pub fn swap() -> CliffordGate {
    gate_from_strs("SWAP", &["IX", "XI"], &["IZ", "ZI"])
}

pub fn cz() -> CliffordGate {
    gate_from_strs("CZ", &["XZ", "ZX"], &["ZI", "IZ"])
}

/// Qubit-permutation gate sending qubit j to `perm[j]`.
pub fn permutation(perm: &[usize]) -> Result<CliffordGate, CliffordError> {
    let n = perm.len();
    let distinct: BTreeSet<usize> = perm.iter().copied().collect();
    if distinct.len() != n || perm.iter().any(|&q| q >= n) {
        return Err(CliffordError::BadPermutation(perm.to_vec()));
    }
    let x_images = perm
        .iter()
        .map(|&q| PauliOp::from_bits(n, 1 << q, 0, Sign::Plus).unwrap())
        .collect();
    let z_images = perm
        .iter()
        .map(|&q| PauliOp::from_bits(n, 0, 1 << q, Sign::Plus).unwrap())
        .collect();
    let name = format!("PERM{}", perm.iter().map(|q| q.to_string()).collect::<String>());
    Ok(CliffordGate { n, name, support: (0..n).collect(), x_images, z_images })
}

/// Circular permutation on n qubits (qubit j -> j+1 mod n).
pub fn circ(n: usize) -> CliffordGate {
    let perm: Vec<usize> = (0..n).map(|j| (j + 1) % n).collect();
    permutation(&perm).unwrap().with_name(format!("CIRC{n}"))
}

fn gate_from_strs(name: &str, x_images: &[&str], z_images: &[&str]) -> CliffordGate {
    let parse = |ss: &[&str]| ss.iter().map(|s| s.parse().unwrap()).collect();
    CliffordGate::from_images(name, parse(x_images), parse(z_images)).unwrap()
}

/// The 24 single-qubit Cliffords in a fixed, deterministic order.
///
/// Well-known gates carry their usual names; the rest are named by a
/// shortest word in H and S (applied right to left, e.g. "HS" is H after S).
pub fn single_qubit_cliffords() -> Vec<CliffordGate> {
    let named: Vec<(&str, &str, &str)> = vec![
        ("I", "X", "Z"),
        ("X", "X", "-Z"),
        ("Y", "-X", "-Z"),
        ("Z", "-X", "Z"),
        ("H", "Z", "X"),
        ("S", "Y", "Z"),
        ("SDG", "-Y", "Z"),
        ("SX", "X", "-Y"),
        ("SXDG", "X", "Y"),
    ];
    let named: Vec<CliffordGate> = named
        .into_iter()
        .map(|(name, x, z)| gate_from_strs(name, &[x], &[z]))
        .collect();
    let key = |g: &CliffordGate| (g.x_image(0).clone(), g.z_image(0).clone());
    let mut seen: Vec<(PauliOp, PauliOp)> = Vec::new();
    let mut out: Vec<CliffordGate> = Vec::new();
    let mut queue: Vec<CliffordGate> = vec![CliffordGate::identity(1)];
    let h = named[4].clone();
    let s = named[5].clone();
    while let Some(g) = queue.pop() {
        if seen.contains(&key(&g)) {
            continue;
        }
        seen.push(key(&g));
        let canonical = named.iter().find(|c| key(c) == key(&g)).cloned().unwrap_or_else(|| {
            let word = if g.name().is_empty() { "I".into() } else { g.name().to_string() };
            g.clone().with_name(word)
        });
        out.push(canonical);
        for (gen, letter) in [(&h, "H"), (&s, "S")] {
            let next = gen.compose(&g).unwrap();
            let word = if g.is_identity() { letter.to_string() } else { format!("{}{}", letter, g.name()) };
            queue.insert(0, next.with_name(word));
        }
    }
    debug_assert_eq!(out.len(), 24);
    out
}

/// Looks up a single-qubit Clifford by name from [`single_qubit_cliffords`].
pub fn single_qubit_by_name(name: &str) -> Option<CliffordGate> {
    single_qubit_cliffords().into_iter().find(|g| g.name() == name)
}

/// Per-qubit library gates mapping `from` to `to` modulo sign; picks the
/// first match in library order per qubit. Requires matching patterns.
pub fn closing_layer(lib: &[CliffordGate], from: &PauliOp, to: &PauliOp) -> Option<Vec<usize>> {
    if from.pattern() != to.pattern() || from.n() != to.n() {
        return None;
    }
    let mut layer = Vec::with_capacity(from.n());
    for j in 0..from.n() {
        let (fd, td) = (from.digit(j), to.digit(j));
        if fd == 0 {
            layer.push(0);
            continue;
        }
        let from1 = PauliOp::from_index(1, fd as u64);
        let idx = lib.iter().position(|g| g.conjugate(&from1).unsigned().digit(0) == td)?;
        layer.push(idx);
    }
    Some(layer)
}

/// Builds the n-qubit gate of a per-qubit library layer.
pub fn layer_gate(lib: &[CliffordGate], layer: &[usize]) -> CliffordGate {
    let n = layer.len();
    let mut gate = CliffordGate::identity(n);
    for (q, &li) in layer.iter().enumerate() {
        gate = lib[li].embed(&[q], n).unwrap().compose(&gate).unwrap();
    }
    gate.with_name(
        layer.iter().map(|&li| lib[li].name().to_string()).collect::<Vec<_>>().join("."),
    )
}

/// A named set of n-qubit Clifford gates sharing one qubit count.
#[derive(Clone, Debug)]
pub struct GateSet {
    n: usize,
    gates: Vec<CliffordGate>,
}

impl GateSet {
    pub fn new(gates: Vec<CliffordGate>) -> Result<GateSet, CliffordError> {
        let n = match gates.first() {
            Some(g) => g.n(),
            None => return Err(CliffordError::EmptyGateSet),
        };
        let mut names = BTreeSet::new();
        for g in &gates {
            if g.n() != n {
                return Err(CliffordError::DimensionMismatch(n, g.n()));
            }
            if !names.insert(g.name().to_string()) {
                return Err(CliffordError::DuplicateName(g.name().to_string()));
            }
        }
        Ok(GateSet { n, gates })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[CliffordGate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn gate(&self, idx: usize) -> &CliffordGate {
        &self.gates[idx]
    }

    pub fn by_name(&self, name: &str) -> Option<(usize, &CliffordGate)> {
        self.gates.iter().enumerate().find(|(_, g)| g.name() == name)
    }

    /// Parses the gate-set JSON format. Accepts either a full gate set
    /// (`{"n": .., "gates": [..]}`) or a bare single-gate tableau
    /// (`{"n": .., "name": .., "x_images": [..], "z_images": [..]}`).
    pub fn from_json(text: &str) -> Result<GateSet, CliffordError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        if value.get("gates").is_some() {
            let file: GateSetFile = serde_json::from_value(value)?;
            let gates = file
                .gates
                .into_iter()
                .map(|spec| spec.build(file.n))
                .collect::<Result<Vec<_>, _>>()?;
            GateSet::new(gates)
        } else {
            let spec: GateSpec = serde_json::from_value(value)?;
            let n = spec.n.ok_or(CliffordError::AmbiguousSpec)?;
            GateSet::new(vec![spec.build(n)?])
        }
    }

    pub fn to_json(&self) -> String {
        let gates: Vec<serde_json::Value> = self
            .gates
            .iter()
            .map(|g| {
                serde_json::json!({
                    "n": g.n(),
                    "name": g.name(),
                    "x_images": (0..g.n()).map(|j| g.x_image(j).to_string()).collect::<Vec<_>>(),
                    "z_images": (0..g.n()).map(|j| g.z_image(j).to_string()).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({ "n": self.n, "gates": gates })).unwrap()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GateSetFile {
    n: usize,
    gates: Vec<GateSpec>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GateSpec {
    #[serde(default)]
    n: Option<usize>,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    builtin: Option<String>,
    #[serde(default)]
    support: Option<Vec<usize>>,
    #[serde(default)]
    perm: Option<Vec<usize>>,
    #[serde(default)]
    x_images: Option<Vec<String>>,
    #[serde(default)]
    z_images: Option<Vec<String>>,
}

impl GateSpec {
    fn build(self, file_n: usize) -> Result<CliffordGate, CliffordError> {
        let n = self.n.unwrap_or(file_n);
        let gate = match (&self.builtin, &self.x_images, &self.z_images) {
            (Some(builtin), None, None) => {
                let base = match builtin.as_str() {
                    "cnot" => cnot(),
                    "swap" => swap(),
                    "cz" => cz(),
                    "identity" => CliffordGate::identity(n),
                    "permutation" => {
                        let perm = self.perm.ok_or(CliffordError::AmbiguousSpec)?;
                        permutation(&perm)?
                    }
                    other => single_qubit_by_name(&other.to_uppercase())
                        .ok_or_else(|| CliffordError::UnknownBuiltin(other.to_string()))?,
                };
                let support = self.support.unwrap_or_else(|| (0..base.n()).collect());
                let embedded = if base.n() == n && support == (0..n).collect::<Vec<_>>() {
                    base
                } else {
                    let default_name = format!(
                        "{}{}",
                        builtin.to_uppercase(),
                        support.iter().map(|q| q.to_string()).collect::<String>()
                    );
                    base.embed(&support, n)?.with_name(default_name)
                };
                embedded
            }
            (None, Some(xs), Some(zs)) => {
                let parse = |ss: &Vec<String>| -> Result<Vec<PauliOp>, CliffordError> {
                    ss.iter().map(|s| s.parse().map_err(CliffordError::from)).collect()
                };
                CliffordGate::from_images(
                    self.name.clone().unwrap_or_else(|| "G".into()),
                    parse(xs)?,
                    parse(zs)?,
                )?
            }
            _ => return Err(CliffordError::AmbiguousSpec),
        };
        Ok(match self.name {
            Some(name) => gate.with_name(name),
            None => gate,
        })
    }
}
