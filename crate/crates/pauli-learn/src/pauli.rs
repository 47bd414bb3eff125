//! n-qubit Pauli operators in binary-symplectic form.
//!
//! A Pauli is two bit words (x, z) plus a sign in {+1, -1}. Bit j of either
//! word refers to qubit j, and Pauli strings are read with qubit 0 as the
//! *leftmost* character: `"IZ"` is I on qubit 0 and Z on qubit 1.
//!
//! Canonical index: every qubit contributes a 2-bit digit `(z_j x_j)` with
//! qubit 0 least significant, so the per-qubit digits are
//! 0 = I, 1 = X, 2 = Z, 3 = Y. This makes the per-qubit Walsh-Hadamard
//! butterfly a contiguous stride-4 kernel (see [`crate::channel`]).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on qubit count so x/z parts fit a single machine word and
/// canonical indices fit a `u64`.
pub const MAX_QUBITS: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PauliError {
    #[error("qubit count {0} exceeds the supported maximum of {MAX_QUBITS}")]
    TooManyQubits(usize),
    #[error("empty Pauli string")]
    Empty,
    #[error("invalid Pauli character {0:?} (expected I, X, Y or Z)")]
    BadChar(char),
    #[error("Pauli operators act on different qubit counts ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("bits extend past qubit count {0}")]
    BitsOutOfRange(usize),
}

/// Overall sign of a Hermitian Pauli operator.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn flipped(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    /// Sign with parity bit b: `+` for 0, `-` for 1.
    pub fn from_parity(b: u32) -> Sign {
        if b & 1 == 0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    pub fn xor(self, other: Sign) -> Sign {
        if self == other {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// A signed Hermitian n-qubit Pauli operator.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PauliOp {
    n: usize,
    x: u64,
    z: u64,
    sign: Sign,
}

impl PauliOp {
    pub fn identity(n: usize) -> PauliOp {
        debug_assert!(n <= MAX_QUBITS);
        PauliOp { n, x: 0, z: 0, sign: Sign::Plus }
    }

    pub fn from_bits(n: usize, x: u64, z: u64, sign: Sign) -> Result<PauliOp, PauliError> {
        if n > MAX_QUBITS {
            return Err(PauliError::TooManyQubits(n));
        }
        let mask = mask(n);
        if x & !mask != 0 || z & !mask != 0 {
            return Err(PauliError::BitsOutOfRange(n));
        }
        Ok(PauliOp { n, x, z, sign })
    }

    /// Pauli from its canonical index (interleaved (z_j x_j) digits).
    pub fn from_index(n: usize, idx: u64) -> PauliOp {
        debug_assert!(n <= MAX_QUBITS && idx < (1u64 << (2 * n)));
        let (x, z) = split_index(idx);
        PauliOp { n, x, z, sign: Sign::Plus }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn x_bits(&self) -> u64 {
        self.x
    }

    pub fn z_bits(&self) -> u64 {
        self.z
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn with_sign(&self, sign: Sign) -> PauliOp {
        PauliOp { sign, ..*self }
    }

    pub fn negated(&self) -> PauliOp {
        self.with_sign(self.sign.flipped())
    }

    /// Drops the sign.
    pub fn unsigned(&self) -> PauliOp {
        self.with_sign(Sign::Plus)
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    /// Canonical index, ignoring the sign.
    pub fn index(&self) -> u64 {
        merge_index(self.x, self.z)
    }

    /// Pattern: bit j set iff the factor on qubit j is not the identity.
    pub fn pattern(&self) -> u64 {
        self.x | self.z
    }

    /// Number of non-identity tensor factors.
    pub fn weight(&self) -> u32 {
        self.pattern().count_ones()
    }

    /// 2-bit digit (z<<1|x) of the factor on qubit j: 0=I, 1=X, 2=Z, 3=Y.
    pub fn digit(&self, qubit: usize) -> u8 {
        debug_assert!(qubit < self.n);
        (((self.x >> qubit) & 1) | (((self.z >> qubit) & 1) << 1)) as u8
    }

    /// Builds a new Pauli with the factor on `qubit` replaced by `digit`.
    pub fn with_digit(&self, qubit: usize, digit: u8) -> PauliOp {
        debug_assert!(qubit < self.n && digit < 4);
        let clear = !(1u64 << qubit);
        PauliOp {
            n: self.n,
            x: (self.x & clear) | ((digit as u64 & 1) << qubit),
            z: (self.z & clear) | (((digit as u64 >> 1) & 1) << qubit),
            sign: self.sign,
        }
    }

    pub fn commutes_with(&self, other: &PauliOp) -> bool {
        symplectic(self, other) == 0
    }
}

/// Binary symplectic form: 0 iff the two Paulis commute.
pub fn symplectic(a: &PauliOp, b: &PauliOp) -> u8 {
    debug_assert_eq!(a.n, b.n);
    (((a.x & b.z).count_ones() + (a.z & b.x).count_ones()) & 1) as u8
}

/// Symplectic form on canonical indices.
pub fn symplectic_idx(a: u64, b: u64) -> u8 {
    let (xa, za) = split_index(a);
    let (xb, zb) = split_index(b);
    (((xa & zb).count_ones() + (za & xb).count_ones()) & 1) as u8
}

pub(crate) fn mask(n: usize) -> u64 {
    if n == 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

/// Splits an interleaved index into (x, z) words.
pub(crate) fn split_index(idx: u64) -> (u64, u64) {
    let mut x = 0u64;
    let mut z = 0u64;
    let mut rest = idx;
    let mut j = 0;
    while rest != 0 {
        x |= (rest & 1) << j;
        z |= ((rest >> 1) & 1) << j;
        rest >>= 2;
        j += 1;
    }
    (x, z)
}

pub(crate) fn merge_index(x: u64, z: u64) -> u64 {
    let mut idx = 0u64;
    let mut rest = x | z;
    let mut j = 0;
    while rest != 0 {
        idx |= (((x >> j) & 1) | (((z >> j) & 1) << 1)) << (2 * j);
        rest &= !(1u64 << j);
        j += 1;
    }
    idx
}

/// Pattern of a canonical Pauli index: bit j set iff digit j is non-identity.
pub fn pattern_of_index(idx: u64) -> u64 {
    let (x, z) = split_index(idx);
    x | z
}

/// Pattern rendered with qubit 0 as the leftmost character.
pub fn pattern_string(pattern: u64, n: usize) -> String {
    (0..n).map(|j| if (pattern >> j) & 1 == 1 { '1' } else { '0' }).collect()
}

const DIGIT_CHARS: [char; 4] = ['I', 'X', 'Z', 'Y'];

impl fmt::Display for PauliOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.sign == Sign::Minus {
            write!(f, "-")?;
        }
        for j in 0..self.n {
            write!(f, "{}", DIGIT_CHARS[self.digit(j) as usize])?;
        }
        Ok(())
    }
}

impl FromStr for PauliOp {
    type Err = PauliError;

    /// Parses `[+-]?[IXYZ]+`, one character per qubit, qubit 0 leftmost.
    fn from_str(s: &str) -> Result<PauliOp, PauliError> {
        let (sign, body) = match s.as_bytes().first() {
            Some(b'+') => (Sign::Plus, &s[1..]),
            Some(b'-') => (Sign::Minus, &s[1..]),
            _ => (Sign::Plus, s),
        };
        if body.is_empty() {
            return Err(PauliError::Empty);
        }
        let n = body.chars().count();
        if n > MAX_QUBITS {
            return Err(PauliError::TooManyQubits(n));
        }
        let mut x = 0u64;
        let mut z = 0u64;
        for (j, c) in body.chars().enumerate() {
            match c {
                'I' => {}
                'X' => x |= 1 << j,
                'Z' => z |= 1 << j,
                'Y' => {
                    x |= 1 << j;
                    z |= 1 << j;
                }
                other => return Err(PauliError::BadChar(other)),
            }
        }
        Ok(PauliOp { n, x, z, sign })
    }
}

/// Pauli with a full i^phase prefix, used transiently while multiplying
/// generator images during Clifford conjugation. The operator is
/// i^phase * X^x * Z^z (X factors multiplied on the left of Z factors).
#[derive(Copy, Clone, Debug)]
pub(crate) struct PhasedPauli {
    pub x: u64,
    pub z: u64,
    /// Power of i, modulo 4.
    pub phase: u8,
}

impl PhasedPauli {
    pub fn identity() -> PhasedPauli {
        PhasedPauli { x: 0, z: 0, phase: 0 }
    }

    /// Canonical operator form of a signed Hermitian Pauli:
    /// P = (-1)^sign * i^|x&z| * X^x Z^z.
    pub fn from_op(p: &PauliOp) -> PhasedPauli {
        let sign_bit = match p.sign {
            Sign::Plus => 0,
            Sign::Minus => 2,
        };
        PhasedPauli {
            x: p.x,
            z: p.z,
            phase: (((p.x & p.z).count_ones() as u8) + sign_bit) & 3,
        }
    }

    /// Right-multiplies by `rhs`: (X^x1 Z^z1)(X^x2 Z^z2) = (-1)^{z1·x2} X^{x1^x2} Z^{z1^z2}.
    pub fn mul_right(&mut self, rhs: &PhasedPauli) {
        let cross = ((self.z & rhs.x).count_ones() as u8 & 1) * 2;
        self.phase = (self.phase + rhs.phase + cross) & 3;
        self.x ^= rhs.x;
        self.z ^= rhs.z;
    }

    /// Converts back to a signed Hermitian Pauli. Panics if the accumulated
    /// phase is imaginary relative to the canonical form, which cannot
    /// happen for products arising from Clifford conjugation.
    pub fn into_op(self, n: usize) -> PauliOp {
        let canonical = ((self.x & self.z).count_ones() as u8) & 3;
        let diff = (self.phase + 4 - canonical) & 3;
        assert!(diff % 2 == 0, "non-Hermitian Pauli product (phase i^{diff})");
        PauliOp {
            n,
            x: self.x,
            z: self.z,
            sign: if diff == 0 { Sign::Plus } else { Sign::Minus },
        }
    }
}
