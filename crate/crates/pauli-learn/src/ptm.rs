//! Dense Pauli-transfer-matrix machinery for the small-n oracle engine.
//!
//! States are tracked as the vector of Pauli coefficients
//! x_b = Tr(P_b rho) in canonical index order; a channel E acts by the PTM
//! `T[a][b] = 2^-n Tr(P_a E(P_b))`. Pauli channels are diagonal, Clifford
//! gates are signed permutations, and general CPTP maps (from Kraus sets)
//! are dense matrices. Everything here is desk-scale (n <= 3 for dense
//! maps) and exists to serve as ground truth for the fast Pauli engine.

use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::channel::PauliChannel;
use crate::clifford::CliffordGate;
use crate::pauli::{PauliOp, Sign};

/// Dense maps are restricted to this many qubits.
pub const MAX_DENSE_QUBITS: usize = 3;

#[derive(Debug, Error)]
pub enum PtmError {
    #[error("matrix is {0}x{1}, expected square 4^n x 4^n")]
    NotSquare(usize, usize),
    #[error("dimension {0} exceeds the dense-oracle limit of 4^{MAX_DENSE_QUBITS}")]
    TooLarge(usize),
    #[error("Kraus set is not trace preserving: ||sum K^dag K - I|| = {0:.3e}")]
    NotTracePreserving(f64),
    #[error("Kraus operators must be 2^n x 2^n complex matrices")]
    BadKrausShape,
}

/// Dense real PTM over the canonical Pauli index.
#[derive(Clone, Debug, PartialEq)]
pub struct Ptm {
    dim: usize,
    data: Vec<f64>,
}

impl Ptm {
    pub fn zeros(dim: usize) -> Ptm {
        Ptm { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Ptm {
        let mut m = Ptm::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Ptm, PtmError> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(PtmError::NotSquare(dim, rows.iter().map(|r| r.len()).max().unwrap_or(0)));
        }
        Ok(Ptm { dim, data: rows.into_iter().flatten().collect() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn qubits(&self) -> Option<usize> {
        let mut n = 0;
        let mut size = 1;
        while size < self.dim {
            size *= 4;
            n += 1;
        }
        (size == self.dim).then_some(n)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn matmul(&self, other: &Ptm) -> Ptm {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = Ptm::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        out
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.dim, x.len());
        let d = self.dim;
        (0..d)
            .map(|i| (0..d).map(|j| self.data[i * d + j] * x[j]).sum())
            .collect()
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).collect()
    }

    /// PTM of a Pauli channel (diagonal).
    pub fn of_pauli_channel(ch: &PauliChannel) -> Ptm {
        let dim = ch.size();
        let mut m = Ptm::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = ch.lambda(i as u64);
        }
        m
    }

    /// PTM of a Clifford gate: a signed permutation.
    pub fn of_clifford(g: &CliffordGate) -> Ptm {
        let dim = 1usize << (2 * g.n());
        let mut m = Ptm::zeros(dim);
        for b in 0..dim {
            let img = g.conjugate(&PauliOp::from_index(g.n(), b as u64));
            m.data[(img.index() as usize) * dim + b] = img.sign().as_f64();
        }
        m
    }
}

/// Small dense complex matrix, row-major, for Kraus arithmetic.
#[derive(Clone, Debug)]
pub struct CMat {
    pub dim: usize,
    pub data: Vec<C64>,
}

impl CMat {
    pub fn zeros(dim: usize) -> CMat {
        CMat { dim, data: vec![C64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> CMat {
        let mut m = CMat::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<(f64, f64)>]) -> Result<CMat, PtmError> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(PtmError::BadKrausShape);
        }
        Ok(CMat {
            dim,
            data: rows.iter().flatten().map(|&(re, im)| C64::new(re, im)).collect(),
        })
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[i * self.dim + j]
    }

    pub fn matmul(&self, other: &CMat) -> CMat {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = CMat::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                for j in 0..d {
                    out.data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        out
    }

    pub fn dagger(&self) -> CMat {
        let d = self.dim;
        let mut out = CMat::zeros(d);
        for i in 0..d {
            for j in 0..d {
                out.data[i * d + j] = self.data[j * d + i].conj();
            }
        }
        out
    }

    pub fn kron(&self, other: &CMat) -> CMat {
        let (da, db) = (self.dim, other.dim);
        let mut out = CMat::zeros(da * db);
        for i in 0..da {
            for j in 0..da {
                let a = self.data[i * da + j];
                for k in 0..db {
                    for l in 0..db {
                        out.data[(i * db + k) * (da * db) + (j * db + l)] =
                            a * other.data[k * db + l];
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// Dense matrix of a signed Pauli, basis |q0 q1 ...> with qubit 0 the
    /// most significant bit (leftmost string character).
    pub fn of_pauli(p: &PauliOp) -> CMat {
        let one = C64::new(1.0, 0.0);
        let i = C64::new(0.0, 1.0);
        let single = |digit: u8| -> CMat {
            let rows = match digit {
                0 => [[one, 0.0 * one], [0.0 * one, one]],
                1 => [[0.0 * one, one], [one, 0.0 * one]],
                2 => [[one, 0.0 * one], [0.0 * one, -one]],
                _ => [[0.0 * one, -i], [i, 0.0 * one]],
            };
            CMat { dim: 2, data: rows.into_iter().flatten().collect() }
        };
        let mut m = single(p.digit(0));
        for j in 1..p.n() {
            m = m.kron(&single(p.digit(j)));
        }
        if p.sign() == Sign::Minus {
            for v in &mut m.data {
                *v = -*v;
            }
        }
        m
    }
}

/// PTM of a CPTP map given by Kraus operators; checks completeness to 1e-10.
pub fn kraus_to_ptm(n: usize, kraus: &[CMat]) -> Result<Ptm, PtmError> {
    if n > MAX_DENSE_QUBITS {
        return Err(PtmError::TooLarge(1 << (2 * n)));
    }
    let hdim = 1usize << n;
    if kraus.is_empty() || kraus.iter().any(|k| k.dim != hdim) {
        return Err(PtmError::BadKrausShape);
    }
    let mut sum = CMat::zeros(hdim);
    for k in kraus {
        let kk = k.dagger().matmul(k);
        for (s, v) in sum.data.iter_mut().zip(&kk.data) {
            *s += v;
        }
    }
    let eye = CMat::identity(hdim);
    let defect: f64 = sum
        .data
        .iter()
        .zip(&eye.data)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max);
    if defect > 1e-10 {
        return Err(PtmError::NotTracePreserving(defect));
    }
    let dim = 1usize << (2 * n);
    let mut m = Ptm::zeros(dim);
    let norm = 1.0 / hdim as f64;
    for b in 0..dim {
        let pb = CMat::of_pauli(&PauliOp::from_index(n, b as u64));
        // E(P_b) = sum_k K P_b K^dag
        let mut image = CMat::zeros(hdim);
        for k in kraus {
            let term = k.matmul(&pb).matmul(&k.dagger());
            for (s, v) in image.data.iter_mut().zip(&term.data) {
                *s += v;
            }
        }
        for a in 0..dim {
            let pa = CMat::of_pauli(&PauliOp::from_index(n, a as u64));
            let val = pa.matmul(&image).trace() * norm;
            debug_assert!(val.im.abs() < 1e-9);
            m.set(a, b, val.re);
        }
    }
    Ok(m)
}

/// Diagonal of a PTM as a Pauli channel: the Pauli twirl of the map.
pub fn pauli_twirl_diagonal(ptm: &Ptm) -> Result<PauliChannel, PtmError> {
    let n = ptm.qubits().ok_or(PtmError::NotSquare(ptm.dim(), ptm.dim()))?;
    if n > MAX_DENSE_QUBITS {
        return Err(PtmError::TooLarge(ptm.dim()));
    }
    Ok(PauliChannel::from_lambdas(ptm.diagonal()).unwrap())
}

/// Explicit twirl average 4^-n sum_a D_a T D_a where D_a is the PTM of the
/// Pauli gate P_a. Used to cross-check [`pauli_twirl_diagonal`].
pub fn twirl_average(ptm: &Ptm) -> Ptm {
    let dim = ptm.dim();
    let mut out = Ptm::zeros(dim);
    for a in 0..dim {
        for i in 0..dim {
            let si = if crate::pauli::symplectic_idx(a as u64, i as u64) == 1 { -1.0 } else { 1.0 };
            for j in 0..dim {
                let sj =
                    if crate::pauli::symplectic_idx(a as u64, j as u64) == 1 { -1.0 } else { 1.0 };
                out.data[i * dim + j] += si * sj * ptm.get(i, j);
            }
        }
    }
    let norm = 1.0 / dim as f64;
    for v in &mut out.data {
        *v *= norm;
    }
    out
}

/// Named single-qubit noise channels as 4x4 PTMs (canonical digit order
/// I, X, Z, Y).
pub mod channels {
    use super::*;

    pub fn amplitude_damping(gamma: f64) -> Ptm {
        let s = (1.0 - gamma).sqrt();
        Ptm::from_rows(vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, s, 0.0, 0.0],
            vec![gamma, 0.0, 1.0 - gamma, 0.0],
            vec![0.0, 0.0, 0.0, s],
        ])
        .unwrap()
    }

    pub fn bit_flip(q: f64) -> Ptm {
        Ptm::from_rows(vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0 - 2.0 * q, 0.0],
            vec![0.0, 0.0, 0.0, 1.0 - 2.0 * q],
        ])
        .unwrap()
    }

    pub fn depolarizing(q: f64) -> Ptm {
        Ptm::from_rows(vec![
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0 - q, 0.0, 0.0],
            vec![0.0, 0.0, 1.0 - q, 0.0],
            vec![0.0, 0.0, 0.0, 1.0 - q],
        ])
        .unwrap()
    }
}

/// Kronecker product of per-qubit 4x4 PTMs into a full PTM.
pub fn kron_ptm(factors: &[Ptm]) -> Ptm {
    assert!(factors.iter().all(|f| f.dim() == 4));
    let n = factors.len();
    let dim = 1usize << (2 * n);
    let mut out = Ptm::zeros(dim);
    for a in 0..dim {
        for b in 0..dim {
            let mut v = 1.0;
            for (j, f) in factors.iter().enumerate() {
                v *= f.get((a >> (2 * j)) & 3, (b >> (2 * j)) & 3);
                if v == 0.0 {
                    break;
                }
            }
            out.set(a, b, v);
        }
    }
    out
}

/// State as the vector of Pauli coefficients x_b = Tr(P_b rho).
#[derive(Clone, Debug)]
pub struct PauliVec {
    n: usize,
    pub coeffs: Vec<f64>,
}

impl PauliVec {
    /// Product state that is the +1 eigenstate of the given Pauli, with
    /// qubits outside its pattern prepared in |0>.
    pub fn eigenstate(p: &PauliOp) -> PauliVec {
        let n = p.n();
        let dim = 1usize << (2 * n);
        // Per-qubit stabilizer digit: the Pauli's factor, or Z off-pattern.
        let stab: Vec<u8> = (0..n)
            .map(|j| {
                let d = p.digit(j);
                if d == 0 {
                    2
                } else {
                    d
                }
            })
            .collect();
        let mut coeffs = vec![0.0; dim];
        for (b, c) in coeffs.iter_mut().enumerate() {
            let mut v = 1.0;
            for (j, &s) in stab.iter().enumerate() {
                let d = ((b >> (2 * j)) & 3) as u8;
                if d == 0 {
                    continue;
                }
                if d != s {
                    v = 0.0;
                    break;
                }
            }
            *c = v;
        }
        PauliVec { n, coeffs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn expval(&self, pauli_idx: u64) -> f64 {
        self.coeffs[pauli_idx as usize]
    }

    pub fn apply_pauli_channel(&mut self, ch: &PauliChannel) {
        debug_assert_eq!(ch.n(), self.n);
        for (c, &l) in self.coeffs.iter_mut().zip(ch.lambdas()) {
            *c *= l;
        }
    }

    /// Conjugation by the Pauli gate with the given index: flips the sign of
    /// every anticommuting coefficient.
    pub fn apply_pauli_gate(&mut self, twirl_idx: u64) {
        for (b, c) in self.coeffs.iter_mut().enumerate() {
            if crate::pauli::symplectic_idx(twirl_idx, b as u64) == 1 {
                *c = -*c;
            }
        }
    }

    pub fn apply_clifford(&mut self, table: &CliffordTable) {
        let mut out = vec![0.0; self.coeffs.len()];
        for (b, &c) in self.coeffs.iter().enumerate() {
            out[table.perm[b]] = table.sign[b] * c;
        }
        self.coeffs = out;
    }

    pub fn apply_ptm(&mut self, m: &Ptm) {
        self.coeffs = m.apply(&self.coeffs);
    }

    /// Applies a 4x4 single-qubit PTM on one qubit.
    pub fn apply_1q_ptm(&mut self, qubit: usize, m: &Ptm) {
        debug_assert_eq!(m.dim(), 4);
        let stride = 1usize << (2 * qubit);
        let dim = self.coeffs.len();
        let block = stride * 4;
        for base in (0..dim).step_by(block) {
            for off in 0..stride {
                let idx = |d: usize| base + off + d * stride;
                let vals = [
                    self.coeffs[idx(0)],
                    self.coeffs[idx(1)],
                    self.coeffs[idx(2)],
                    self.coeffs[idx(3)],
                ];
                for r in 0..4 {
                    self.coeffs[idx(r)] = (0..4).map(|c| m.get(r, c) * vals[c]).sum();
                }
            }
        }
    }

    /// Outcome distribution of measuring every qubit in the Pauli basis
    /// given by `bases` (digit per qubit: 1 = X, 2 = Z, 3 = Y). Outcome bit
    /// j is 0 for the +1 eigenvalue on qubit j; outcome index packs bit j
    /// at position j.
    pub fn measure_distribution(&self, bases: &[u8]) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(bases.len(), n);
        let outcomes = 1usize << n;
        let mut dist = vec![0.0; outcomes];
        for subset in 0..outcomes as u64 {
            // Pauli with basis digit on every qubit in the subset.
            let mut idx = 0u64;
            for j in 0..n {
                if (subset >> j) & 1 == 1 {
                    idx |= (bases[j] as u64) << (2 * j);
                }
            }
            let coeff = self.coeffs[idx as usize];
            if coeff == 0.0 {
                continue;
            }
            for (o, d) in dist.iter_mut().enumerate() {
                let parity = (o as u64 & subset).count_ones() & 1;
                *d += if parity == 1 { -coeff } else { coeff };
            }
        }
        let norm = 1.0 / outcomes as f64;
        for d in &mut dist {
            *d *= norm;
        }
        dist
    }
}

/// Precomputed signed-permutation action of a Clifford gate on Pauli
/// coefficient vectors.
#[derive(Clone, Debug)]
pub struct CliffordTable {
    pub perm: Vec<usize>,
    pub sign: Vec<f64>,
}

impl CliffordTable {
    pub fn new(g: &CliffordGate) -> CliffordTable {
        let dim = 1usize << (2 * g.n());
        let mut perm = vec![0usize; dim];
        let mut sign = vec![0.0; dim];
        for b in 0..dim {
            let img = g.conjugate(&PauliOp::from_index(g.n(), b as u64));
            perm[b] = img.index() as usize;
            sign[b] = img.sign().as_f64();
        }
        CliffordTable { perm, sign }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::{cnot, single_qubit_by_name};
    use crate::pauli::{merge_index, pattern_of_index, split_index};

    #[test]
    fn pauli_channel_ptm_is_its_own_twirl_diagonal() {
        let ch = PauliChannel::depolarizing(1, 0, 0.2);
        let ptm = Ptm::of_pauli_channel(&ch);
        let twirled = pauli_twirl_diagonal(&ptm).unwrap();
        assert_eq!(twirled.lambdas(), ch.lambdas());
    }

    #[test]
    fn amplitude_damping_twirl() {
        let gamma = 0.3;
        let ptm = channels::amplitude_damping(gamma);
        let tw = pauli_twirl_diagonal(&ptm).unwrap();
        let s = (1.0 - gamma).sqrt();
        // Canonical order I, X, Z, Y.
        let expected = [1.0, s, 1.0 - gamma, s];
        for (a, b) in tw.lambdas().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
        // Against the Kraus construction.
        let k0 = CMat::from_rows(&[
            vec![(1.0, 0.0), (0.0, 0.0)],
            vec![(0.0, 0.0), (s, 0.0)],
        ])
        .unwrap();
        let k1 = CMat::from_rows(&[
            vec![(0.0, 0.0), (gamma.sqrt(), 0.0)],
            vec![(0.0, 0.0), (0.0, 0.0)],
        ])
        .unwrap();
        let from_kraus = kraus_to_ptm(1, &[k0, k1]).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                assert!((from_kraus.get(i, j) - ptm.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn z_rotation_twirl() {
        let theta = 0.7f64;
        let half = theta / 2.0;
        let u = CMat::from_rows(&[
            vec![(half.cos(), -half.sin()), (0.0, 0.0)],
            vec![(0.0, 0.0), (half.cos(), half.sin())],
        ])
        .unwrap();
        let ptm = kraus_to_ptm(1, &[u]).unwrap();
        let tw = pauli_twirl_diagonal(&ptm).unwrap();
        // Order I, X, Z, Y: lambda = (1, cos t, 1, cos t).
        let expected = [1.0, theta.cos(), 1.0, theta.cos()];
        for (a, b) in tw.lambdas().iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn twirl_average_matches_diagonal() {
        for n in 1..=2usize {
            let gamma = 0.17;
            let one = channels::amplitude_damping(gamma);
            let ptm = if n == 1 { one.clone() } else { kron_ptm(&[one.clone(), one]) };
            let avg = twirl_average(&ptm);
            let diag = pauli_twirl_diagonal(&ptm).unwrap();
            let dim = ptm.dim();
            for i in 0..dim {
                for j in 0..dim {
                    let want = if i == j { diag.lambda(i as u64) } else { 0.0 };
                    assert!((avg.get(i, j) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn incomplete_kraus_rejected() {
        let k = CMat::from_rows(&[
            vec![(0.5, 0.0), (0.0, 0.0)],
            vec![(0.0, 0.0), (0.5, 0.0)],
        ])
        .unwrap();
        assert!(matches!(kraus_to_ptm(1, &[k]), Err(PtmError::NotTracePreserving(_))));
    }

    #[test]
    fn eigenstate_expectations() {
        let p: PauliOp = "IX".parse().unwrap();
        let state = PauliVec::eigenstate(&p);
        assert_eq!(state.expval(p.index()), 1.0);
        // The |0> filler makes ZI a stabilizer too, and ZX their product.
        assert_eq!(state.expval("ZI".parse::<PauliOp>().unwrap().index()), 1.0);
        assert_eq!(state.expval("ZX".parse::<PauliOp>().unwrap().index()), 1.0);
        assert_eq!(state.expval("XI".parse::<PauliOp>().unwrap().index()), 0.0);
        assert_eq!(state.expval(0), 1.0);
    }

    #[test]
    fn measurement_distribution_of_plus_state() {
        let p: PauliOp = "X".parse().unwrap();
        let state = PauliVec::eigenstate(&p);
        let dist = state.measure_distribution(&[1]);
        assert!((dist[0] - 1.0).abs() < 1e-12);
        assert!(dist[1].abs() < 1e-12);
        let dist_z = state.measure_distribution(&[2]);
        assert!((dist_z[0] - 0.5).abs() < 1e-12);
        assert!((dist_z[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn clifford_table_matches_conjugation() {
        let g = cnot();
        let table = CliffordTable::new(&g);
        let mut state = PauliVec::eigenstate(&"XI".parse::<PauliOp>().unwrap());
        state.apply_clifford(&table);
        // CNOT|+0> has stabilizers XX and ZZ.
        assert_eq!(state.expval("XX".parse::<PauliOp>().unwrap().index()), 1.0);
        assert_eq!(state.expval("ZZ".parse::<PauliOp>().unwrap().index()), 1.0);
        assert_eq!(state.expval("XI".parse::<PauliOp>().unwrap().index()), 0.0);
    }

    #[test]
    fn one_qubit_ptm_application_matches_dense() {
        let gamma = 0.25;
        let ad = channels::amplitude_damping(gamma);
        let full = kron_ptm(&[ad.clone(), Ptm::identity(4)]);
        let s_gate = single_qubit_by_name("S").unwrap();
        let mut a = PauliVec::eigenstate(&"YZ".parse::<PauliOp>().unwrap());
        a.apply_clifford(&CliffordTable::new(&s_gate.embed(&[0], 2).unwrap()));
        let mut b = a.clone();
        a.apply_1q_ptm(0, &ad);
        b.apply_ptm(&full);
        for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn split_merge_consistency() {
        for idx in 0..256u64 {
            let (x, z) = split_index(idx);
            assert_eq!(merge_index(x, z), idx);
            assert_eq!(pattern_of_index(idx), x | z);
        }
    }
}
