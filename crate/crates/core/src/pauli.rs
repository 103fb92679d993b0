//! Phase-tracked Pauli strings in binary symplectic form.
//!
//! A [`PauliString`] on `n` qubits stores an X-part and a Z-part bit vector plus a
//! phase exponent `k` (mod 4). It denotes `i^k · σ_0 ⊗ σ_1 ⊗ … ⊗ σ_{n-1}` where
//! `σ_q` is `I`, `X`, `Z` or `Y` for `(x_q, z_q)` equal to `(0,0)`, `(1,0)`, `(0,1)`
//! and `(1,1)`. Note that `Y` is stored as itself, so a Hermitian string always has
//! phase 0 (`+`) or 2 (`-`).
//!
//! Qubit `q` is bit `q` of the packed vectors. Multi-graph composites keep the
//! ascending-vertex-index order.

use std::fmt;
use std::str::FromStr;

use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::gf2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }

    pub fn from_symbol(c: char) -> Option<Self> {
        match c {
            'I' | '_' => Some(Pauli::I),
            'X' => Some(Pauli::X),
            'Y' => Some(Pauli::Y),
            'Z' => Some(Pauli::Z),
            _ => None,
        }
    }
}

/// Sorted set of distinct qubit indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct QubitSubset {
    indices: Vec<usize>,
}

impl QubitSubset {
    /// Builds a subset of `0..n`. Indices are sorted; duplicates are an error.
    pub fn new(indices: impl IntoIterator<Item = usize>, n: usize) -> Result<Self> {
        let mut v: Vec<usize> = indices.into_iter().collect();
        v.sort_unstable();
        for w in v.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateQubit(w[0]));
            }
        }
        if let Some(&last) = v.last() {
            if last >= n {
                return Err(Error::QubitOutOfRange { index: last, n });
            }
        }
        Ok(QubitSubset { indices: v })
    }

    pub fn empty() -> Self {
        QubitSubset::default()
    }

    pub fn all(n: usize) -> Self {
        QubitSubset {
            indices: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, q: usize) -> bool {
        self.indices.binary_search(&q).is_ok()
    }

    /// Dense position of `q` inside the subset.
    pub fn position(&self, q: usize) -> Option<usize> {
        self.indices.binary_search(&q).ok()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn complement(&self, n: usize) -> QubitSubset {
        QubitSubset {
            indices: (0..n).filter(|&q| !self.contains(q)).collect(),
        }
    }
}

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    x: BitVec,
    z: BitVec,
    phase: u8,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        PauliString {
            x: BitVec::zeros(n),
            z: BitVec::zeros(n),
            phase: 0,
        }
    }

    pub fn from_parts(x: BitVec, z: BitVec, phase: u8) -> Result<Self> {
        if x.len() != z.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                found: z.len(),
            });
        }
        Ok(PauliString {
            x,
            z,
            phase: phase % 4,
        })
    }

    pub fn from_paulis(paulis: &[Pauli]) -> Self {
        let mut p = PauliString::identity(paulis.len());
        for (q, &s) in paulis.iter().enumerate() {
            p.set_pauli(q, s);
        }
        p
    }

    /// `P` on qubit `q`, identity elsewhere.
    pub fn single(n: usize, q: usize, pauli: Pauli) -> Result<Self> {
        if q >= n {
            return Err(Error::QubitOutOfRange { index: q, n });
        }
        let mut p = PauliString::identity(n);
        p.set_pauli(q, pauli);
        Ok(p)
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.x.len()
    }

    pub fn x_bits(&self) -> &BitVec {
        &self.x
    }

    pub fn z_bits(&self) -> &BitVec {
        &self.z
    }

    /// Phase exponent `k` of the global factor `i^k`.
    #[inline]
    pub fn phase(&self) -> u8 {
        self.phase
    }

    pub fn with_phase(mut self, phase: u8) -> Self {
        self.phase = phase % 4;
        self
    }

    pub fn is_hermitian(&self) -> bool {
        self.phase.is_multiple_of(2)
    }

    /// `+1` or `-1` for Hermitian strings, `None` for `±i`.
    pub fn sign(&self) -> Option<i8> {
        match self.phase {
            0 => Some(1),
            2 => Some(-1),
            _ => None,
        }
    }

    pub fn negate(&mut self) {
        self.phase = (self.phase + 2) % 4;
    }

    pub fn negated(mut self) -> Self {
        self.negate();
        self
    }

    pub fn pauli(&self, q: usize) -> Pauli {
        Pauli::from_bits(self.x.get(q), self.z.get(q))
    }

    pub fn set_pauli(&mut self, q: usize, pauli: Pauli) {
        let (x, z) = pauli.bits();
        self.x.set(q, x);
        self.z.set(q, z);
    }

    pub fn is_identity(&self) -> bool {
        self.x.is_zero() && self.z.is_zero()
    }

    pub fn weight(&self) -> usize {
        (0..self.num_qubits())
            .filter(|&q| self.x.get(q) || self.z.get(q))
            .count()
    }

    pub fn support(&self) -> QubitSubset {
        QubitSubset {
            indices: (0..self.num_qubits())
                .filter(|&q| self.x.get(q) || self.z.get(q))
                .collect(),
        }
    }

    /// The `(x|z)` row used by GF(2) routines; phase is dropped.
    pub fn symplectic(&self) -> BitVec {
        self.x.concat(&self.z)
    }

    fn check_len(&self, other: &PauliString) -> Result<()> {
        if self.num_qubits() != other.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits(),
                found: other.num_qubits(),
            });
        }
        Ok(())
    }

    /// `self ← self · other`. Lengths must match.
    pub(crate) fn mul_assign_unchecked(&mut self, other: &PauliString) {
        let mut plus = 0u32;
        let mut minus = 0u32;
        for (((x1, z1), x2), z2) in self
            .x
            .words()
            .iter()
            .zip(self.z.words())
            .zip(other.x.words())
            .zip(other.z.words())
        {
            let (x1, z1, x2, z2) = (*x1, *z1, *x2, *z2);
            // XY = iZ, YZ = iX, ZX = iY; the reversed orders give -i.
            let p = (x1 & !z1 & x2 & z2) | (x1 & z1 & !x2 & z2) | (!x1 & z1 & x2 & !z2);
            let m = (x1 & !z1 & !x2 & z2) | (x1 & z1 & x2 & !z2) | (!x1 & z1 & x2 & z2);
            plus += p.count_ones();
            minus += m.count_ones();
        }
        let delta = (plus as i64 - minus as i64).rem_euclid(4) as u8;
        self.phase = (self.phase + other.phase + delta) % 4;
        self.x.xor_assign(&other.x);
        self.z.xor_assign(&other.z);
    }

    pub fn multiply(&self, other: &PauliString) -> Result<PauliString> {
        self.check_len(other)?;
        let mut out = self.clone();
        out.mul_assign_unchecked(other);
        Ok(out)
    }

    pub(crate) fn commutes_unchecked(&self, other: &PauliString) -> bool {
        (self.x.and_count(&other.z) + self.z.and_count(&other.x)).is_multiple_of(2)
    }

    /// Symplectic commutation test.
    pub fn commutes(&self, other: &PauliString) -> Result<bool> {
        self.check_len(other)?;
        Ok(self.commutes_unchecked(other))
    }

    /// Entries at `subset`, re-indexed densely in subset order. The phase is kept as is.
    pub fn restrict(&self, subset: &QubitSubset) -> Result<PauliString> {
        if let Some(&last) = subset.as_slice().last() {
            if last >= self.num_qubits() {
                return Err(Error::QubitOutOfRange {
                    index: last,
                    n: self.num_qubits(),
                });
            }
        }
        Ok(PauliString {
            x: self.x.gather(subset.as_slice()),
            z: self.z.gather(subset.as_slice()),
            phase: self.phase,
        })
    }

    /// Conjugation by `Z_q`: flips the sign when the string has X or Y at `q`.
    pub fn conjugate_by_z(&mut self, q: usize) {
        if self.x.get(q) {
            self.negate();
        }
    }
}

/// Free-function form of [`PauliString::multiply`].
pub fn multiply(a: &PauliString, b: &PauliString) -> Result<PauliString> {
    a.multiply(b)
}

/// Free-function form of [`PauliString::commutes`].
pub fn commutes(a: &PauliString, b: &PauliString) -> Result<bool> {
    a.commutes(b)
}

/// Free-function form of [`PauliString::restrict`].
pub fn restrict(p: &PauliString, subset: &QubitSubset) -> Result<PauliString> {
    p.restrict(subset)
}

/// GF(2) rank of the `(x|z)` rows, ignoring phases.
pub fn gf2_rank(rows: &[PauliString]) -> usize {
    let bits: Vec<BitVec> = rows.iter().map(PauliString::symplectic).collect();
    gf2::rank(&bits)
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.phase {
            0 => "+",
            1 => "+i",
            2 => "-",
            _ => "-i",
        })?;
        for q in 0..self.num_qubits() {
            write!(f, "{}", self.pauli(q).symbol())?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Accepts `[+|-][i]` followed by `I`, `X`, `Y`, `Z` symbols, e.g. `-YXXY`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (mut phase, rest) = if let Some(r) = s.strip_prefix('-') {
            (2u8, r)
        } else if let Some(r) = s.strip_prefix('+') {
            (0u8, r)
        } else {
            (0u8, s)
        };
        let rest = if let Some(r) = rest.strip_prefix('i') {
            phase += 1;
            r
        } else {
            rest
        };
        let paulis = rest
            .chars()
            .map(|c| {
                Pauli::from_symbol(c)
                    .ok_or_else(|| Error::Parse(format!("unexpected symbol {c:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PauliString::from_paulis(&paulis).with_phase(phase))
    }
}
