//! Stabilizer tableaus, single-qubit Pauli measurements, measurement-consistent
//! subgroups, embedded parity checks, stabilizer fidelity and the fusion check.
//!
//! Measured qubits stay in the tableau during a pattern and are compacted out
//! afterwards with [`StabilizerTableau::reduce`].

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::gf2::{self, AffineSystem, Echelon};
use crate::graph::{generator, Graph};
use crate::pauli::{Pauli, PauliString, QubitSubset};

/// `n` independent, commuting, Hermitian generators on `n` qubits.
#[derive(Clone, PartialEq, Eq)]
pub struct StabilizerTableau {
    n: usize,
    generators: Vec<PauliString>,
}

/// Result of one single-qubit measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurement {
    pub sign: i8,
    /// `0.5` for a random outcome, `1.0` for a deterministic one.
    pub probability: f64,
    pub random: bool,
}

fn check_sign(sign: i8) -> Result<()> {
    if sign == 1 || sign == -1 {
        Ok(())
    } else {
        Err(Error::Domain(format!("outcome sign must be +1 or -1, got {sign}")))
    }
}

fn check_basis(basis: Pauli) -> Result<()> {
    if basis == Pauli::I {
        Err(Error::Domain("measurement basis must be X, Y or Z".into()))
    } else {
        Ok(())
    }
}

/// Product of the rows selected by `combo`, phases included.
fn product(rows: &[PauliString], combo: &BitVec, n: usize) -> PauliString {
    let mut out = PauliString::identity(n);
    for j in combo.iter_ones() {
        out.mul_assign_unchecked(&rows[j]);
    }
    out
}

fn symplectic_rows(rows: &[PauliString]) -> Vec<BitVec> {
    rows.iter().map(PauliString::symplectic).collect()
}

impl StabilizerTableau {
    /// Stabilizer `{X_i ∏_{j∈N(i)} Z_j}` of the graph state.
    pub fn from_graph(g: &Graph) -> Self {
        let generators = (0..g.num_vertices())
            .map(|i| generator(g, i).expect("vertex in range"))
            .collect();
        StabilizerTableau {
            n: g.num_vertices(),
            generators,
        }
    }

    /// Validated construction from explicit generators.
    pub fn from_generators(generators: Vec<PauliString>) -> Result<Self> {
        let n = generators.first().map_or(0, PauliString::num_qubits);
        let t = StabilizerTableau { n, generators };
        t.validate()?;
        Ok(t)
    }

    /// `|0…0⟩` stabilized by `Z_i`.
    pub fn zero_state(n: usize) -> Self {
        StabilizerTableau {
            n,
            generators: (0..n)
                .map(|q| PauliString::single(n, q, Pauli::Z).expect("in range"))
                .collect(),
        }
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn generators(&self) -> &[PauliString] {
        &self.generators
    }

    /// Checks count, width, Hermitian phases, commutation and full rank.
    pub fn validate(&self) -> Result<()> {
        if self.generators.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: self.generators.len(),
            });
        }
        for (i, g) in self.generators.iter().enumerate() {
            if g.num_qubits() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    found: g.num_qubits(),
                });
            }
            if !g.is_hermitian() {
                return Err(Error::Precondition(format!("generator {i} ({g}) has phase ±i")));
            }
            for h in &self.generators[..i] {
                if !g.commutes_unchecked(h) {
                    return Err(Error::Precondition(format!("generators {g} and {h} anticommute")));
                }
            }
        }
        let r = gf2::rank(&symplectic_rows(&self.generators));
        if r != self.n {
            return Err(Error::Precondition(format!(
                "generators have rank {r}, expected {}",
                self.n
            )));
        }
        Ok(())
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(Error::QubitOutOfRange { index: q, n: self.n });
        }
        Ok(())
    }

    /// Conjugation by `Z_q`.
    pub fn apply_local_z(&mut self, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        for g in &mut self.generators {
            g.conjugate_by_z(q);
        }
        Ok(())
    }

    pub fn with_local_z(mut self, q: usize) -> Result<Self> {
        self.apply_local_z(q)?;
        Ok(self)
    }

    /// Conjugation by an arbitrary Pauli: flips every generator that anticommutes with it.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<()> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: p.num_qubits(),
            });
        }
        for g in &mut self.generators {
            if !g.commutes_unchecked(p) {
                g.negate();
            }
        }
        Ok(())
    }

    /// Sign `s` with `s·P` in the group, or `None` if neither `±P` is. The phase of `p`
    /// is ignored.
    pub fn stabilizer_sign(&self, p: &PauliString) -> Result<Option<i8>> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: p.num_qubits(),
            });
        }
        let ech = Echelon::new(&symplectic_rows(&self.generators));
        Ok(ech
            .express(&p.symplectic(), self.n)
            .map(|c| product(&self.generators, &c, self.n))
            .and_then(|prod| prod.sign()))
    }

    /// The outcome of measuring `basis` on `q` if it is deterministic.
    pub fn peek(&self, q: usize, basis: Pauli) -> Result<Option<i8>> {
        self.check_qubit(q)?;
        check_basis(basis)?;
        let random = self
            .generators
            .iter()
            .any(|g| !matches!(g.pauli(q), Pauli::I) && g.pauli(q) != basis);
        if random {
            return Ok(None);
        }
        let p = PauliString::single(self.n, q, basis)?;
        self.stabilizer_sign(&p)
    }

    /// Measures `basis` on qubit `q`. A random outcome honours `forced` when given and
    /// is drawn from `rng` otherwise; forcing the opposite of a deterministic outcome
    /// is an error.
    pub fn measure<R: Rng + ?Sized>(
        &mut self,
        q: usize,
        basis: Pauli,
        forced: Option<i8>,
        rng: &mut R,
    ) -> Result<Measurement> {
        self.check_qubit(q)?;
        check_basis(basis)?;
        if let Some(s) = forced {
            check_sign(s)?;
        }
        let anti: Vec<usize> = (0..self.n)
            .filter(|&j| {
                let p = self.generators[j].pauli(q);
                p != Pauli::I && p != basis
            })
            .collect();
        let obs = PauliString::single(self.n, q, basis)?;
        if let Some((&k, rest)) = anti.split_first() {
            let pivot = self.generators[k].clone();
            for &j in rest {
                self.generators[j].mul_assign_unchecked(&pivot);
            }
            let sign = forced.unwrap_or_else(|| if rng.random_bool(0.5) { 1 } else { -1 });
            self.generators[k] = if sign == 1 { obs } else { obs.negated() };
            return Ok(Measurement {
                sign,
                probability: 0.5,
                random: true,
            });
        }
        let sign = self
            .stabilizer_sign(&obs)?
            .expect("a commuting Pauli lies in a maximal stabilizer group");
        if let Some(s) = forced {
            if s != sign {
                return Err(Error::ImpossibleOutcome { qubit: q, sign: s });
            }
        }
        Ok(Measurement {
            sign,
            probability: 1.0,
            random: false,
        })
    }

    /// Measurement with a prescribed outcome and no randomness.
    pub fn measure_forced(&mut self, q: usize, basis: Pauli, sign: i8) -> Result<Measurement> {
        self.measure(q, basis, Some(sign), &mut NoRng)
    }

    /// Removes measured qubits after a pattern. Every `(q, basis)` must be an eigen-
    /// operator of the state; the result lives on the remaining qubits in ascending order.
    pub fn reduce(&self, measured: &[(usize, Pauli)]) -> Result<StabilizerTableau> {
        let subset = QubitSubset::new(measured.iter().map(|&(q, _)| q), self.n)?;
        let mut gens = self.generators.clone();
        let mut used = vec![false; self.n];
        for &(q, basis) in measured {
            check_basis(basis)?;
            let obs = PauliString::single(self.n, q, basis)?;
            let ech = Echelon::new(&symplectic_rows(&gens));
            let combo = ech.express(&obs.symplectic(), self.n).ok_or_else(|| {
                Error::Precondition(format!("qubit {q} is not in an eigenstate of {basis:?}"))
            })?;
            let r = combo
                .iter_ones()
                .find(|&j| !used[j])
                .expect("combination cannot involve earlier single-qubit rows");
            let e = product(&gens, &combo, self.n);
            for (j, g) in gens.iter_mut().enumerate() {
                if j != r && g.pauli(q) != Pauli::I {
                    g.mul_assign_unchecked(&e);
                }
            }
            gens[r] = e;
            used[r] = true;
        }
        let kept = subset.complement(self.n);
        let generators = gens
            .iter()
            .zip(&used)
            .filter(|(_, &u)| !u)
            .map(|(g, _)| g.restrict(&kept))
            .collect::<Result<Vec<_>>>()?;
        Ok(StabilizerTableau {
            n: kept.len(),
            generators,
        })
    }

    /// Reduced row-echelon generators with signs. Two tableaus describe the same state
    /// exactly when their canonical forms are equal.
    pub fn canonical(&self) -> Vec<PauliString> {
        canonical_generators(&self.generators)
    }

    pub fn same_state(&self, other: &StabilizerTableau) -> bool {
        self.n == other.n && self.canonical() == other.canonical()
    }

    /// Same group up to signs.
    pub fn same_unsigned_group(&self, other: &StabilizerTableau) -> bool {
        if self.n != other.n {
            return false;
        }
        let mut rows = symplectic_rows(&self.generators);
        rows.extend(symplectic_rows(&other.generators));
        gf2::rank(&rows) == self.n
    }

    /// One signed Pauli string per line.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        for g in &self.generators {
            s.push_str(&g.to_string());
            s.push('\n');
        }
        s
    }

    pub fn parse_dump(text: &str) -> Result<Self> {
        let gens = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::parse)
            .collect::<Result<Vec<PauliString>>>()?;
        Self::from_generators(gens)
    }
}

impl fmt::Debug for StabilizerTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.generators.iter()).finish()
    }
}

impl fmt::Display for StabilizerTableau {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.dump())
    }
}

/// Always-failing generator for forced measurements.
struct NoRng;

impl rand::RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("forced measurement drew a random number")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("forced measurement drew a random number")
    }
    fn fill_bytes(&mut self, _: &mut [u8]) {
        unreachable!("forced measurement drew a random number")
    }
}

/// Signed RREF of a set of commuting Hermitian rows (columns x₀…x_{n-1}, z₀…z_{n-1}).
pub fn canonical_generators(rows: &[PauliString]) -> Vec<PauliString> {
    let mut rows: Vec<PauliString> = rows.to_vec();
    let Some(n) = rows.first().map(PauliString::num_qubits) else {
        return rows;
    };
    let mut top = 0;
    for col in 0..2 * n {
        let bit = |p: &PauliString| {
            if col < n {
                p.x_bits().get(col)
            } else {
                p.z_bits().get(col - n)
            }
        };
        let Some(piv) = (top..rows.len()).find(|&r| bit(&rows[r])) else {
            continue;
        };
        rows.swap(top, piv);
        let pivot = rows[top].clone();
        for (r, row) in rows.iter_mut().enumerate() {
            if r != top && bit(row) {
                row.mul_assign_unchecked(&pivot);
            }
        }
        top += 1;
    }
    rows.truncate(top);
    rows
}

/// Single-qubit Pauli measurements in a fixed order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementPattern {
    n: usize,
    assignments: BTreeMap<usize, Pauli>,
    order: Vec<usize>,
}

impl MeasurementPattern {
    /// Measurements applied in the order given.
    pub fn new(n: usize, steps: impl IntoIterator<Item = (usize, Pauli)>) -> Result<Self> {
        let mut assignments = BTreeMap::new();
        let mut order = Vec::new();
        for (q, b) in steps {
            check_basis(b)?;
            if q >= n {
                return Err(Error::QubitOutOfRange { index: q, n });
            }
            if assignments.insert(q, b).is_some() {
                return Err(Error::DuplicateQubit(q));
            }
            order.push(q);
        }
        Ok(MeasurementPattern {
            n,
            assignments,
            order,
        })
    }

    pub fn all_x(n: usize, qubits: impl IntoIterator<Item = usize>) -> Result<Self> {
        Self::new(n, qubits.into_iter().map(|q| (q, Pauli::X)))
    }

    /// X on every non-terminal vertex, in ascending order.
    pub fn internal_x(g: &Graph) -> Self {
        Self::all_x(g.num_vertices(), g.internal().iter()).expect("internal vertices are valid")
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn basis(&self, q: usize) -> Option<Pauli> {
        self.assignments.get(&q).copied()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `(qubit, basis)` in measurement order.
    pub fn steps(&self) -> Vec<(usize, Pauli)> {
        self.order.iter().map(|&q| (q, self.assignments[&q])).collect()
    }

    pub fn measured(&self) -> QubitSubset {
        QubitSubset::new(self.order.iter().copied(), self.n).expect("validated at construction")
    }

    pub fn kept(&self) -> QubitSubset {
        self.measured().complement(self.n)
    }
}

/// Observed signs, keyed by measured qubit.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OutcomeRecord {
    signs: BTreeMap<usize, i8>,
}

impl OutcomeRecord {
    pub fn new(signs: impl IntoIterator<Item = (usize, i8)>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (q, s) in signs {
            check_sign(s)?;
            if map.insert(q, s).is_some() {
                return Err(Error::DuplicateQubit(q));
            }
        }
        Ok(OutcomeRecord { signs: map })
    }

    /// The same sign on every measured qubit.
    pub fn uniform(measured: &QubitSubset, sign: i8) -> Result<Self> {
        Self::new(measured.iter().map(|q| (q, sign)))
    }

    /// Bit `k` set means qubit `measured[k]` gave `-1`.
    pub fn from_bits(measured: &QubitSubset, bits: &BitVec) -> Self {
        OutcomeRecord {
            signs: measured
                .iter()
                .enumerate()
                .map(|(k, q)| (q, if bits.get(k) { -1 } else { 1 }))
                .collect(),
        }
    }

    pub fn to_bits(&self, measured: &QubitSubset) -> Result<BitVec> {
        if self.signs.len() != measured.len() || measured.iter().any(|q| !self.signs.contains_key(&q)) {
            return Err(Error::Precondition(
                "outcome record must cover exactly the measured qubits".into(),
            ));
        }
        Ok(BitVec::from_bools(
            &measured.iter().map(|q| self.signs[&q] == -1).collect::<Vec<_>>(),
        ))
    }

    pub fn sign(&self, q: usize) -> Option<i8> {
        self.signs.get(&q).copied()
    }

    pub fn signs(&self) -> &BTreeMap<usize, i8> {
        &self.signs
    }
}

/// Parity constraint `∏_{j ∈ support} s_j = sign` from a stabilizer supported on
/// measured qubits only.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParityCheck {
    pub support: QubitSubset,
    /// Support as a mask over the measured qubits (ascending order).
    pub mask: BitVec,
    pub sign: i8,
}

impl ParityCheck {
    pub fn holds(&self, outcome_bits: &BitVec) -> bool {
        self.mask.dot(outcome_bits) == (self.sign == -1)
    }
}

/// A post-measurement generator whose sign depends affinely on the outcome bits:
/// the sign bit is `phase/2 ⊕ mask·b`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedRow {
    /// Pauli on the kept qubits; its phase (0 or 2) is the outcome-independent sign.
    pub pauli: PauliString,
    pub mask: BitVec,
}

impl SignedRow {
    pub fn evaluate(&self, outcome_bits: &BitVec) -> PauliString {
        if self.mask.dot(outcome_bits) {
            self.pauli.clone().negated()
        } else {
            self.pauli.clone()
        }
    }
}

/// Everything a pattern implies about a stabilizer state, for all outcomes at once.
#[derive(Debug, Clone)]
pub struct PatternAnalysis {
    pub measured: QubitSubset,
    pub kept: QubitSubset,
    /// Basis of the consistent subgroup, as full-width strings.
    pub consistent: Vec<PauliString>,
    pub checks: Vec<ParityCheck>,
    /// `|kept|` independent rows generating the post-measurement state.
    pub post: Vec<SignedRow>,
}

impl PatternAnalysis {
    pub fn new(t: &StabilizerTableau, m: &MeasurementPattern) -> Result<Self> {
        if t.num_qubits() != m.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: t.num_qubits(),
                found: m.num_qubits(),
            });
        }
        let n = t.num_qubits();
        let measured = m.measured();
        let kept = measured.complement(n);
        let consistent = consistent_subgroup(t, m)?;
        let kept_rows: Vec<BitVec> = consistent
            .iter()
            .map(|q| Ok(q.restrict(&kept)?.symplectic()))
            .collect::<Result<_>>()?;
        let ech = Echelon::new(&kept_rows);
        let split = |p: &PauliString| -> Result<(PauliString, BitVec)> {
            let on_measured = p.x_bits().gather(measured.as_slice());
            let mut mask = on_measured;
            let z = p.z_bits().gather(measured.as_slice());
            for k in z.iter_ones() {
                mask.set(k, true);
            }
            Ok((p.restrict(&kept)?, mask))
        };
        let mut checks = Vec::with_capacity(ech.kernel.len());
        for c in &ech.kernel {
            let e = product(&consistent, c, n);
            let (_, mask) = split(&e)?;
            let sign = e.sign().expect("consistent elements are Hermitian");
            let support = QubitSubset::new(mask.iter_ones().map(|k| measured.as_slice()[k]), n)?;
            checks.push(ParityCheck { support, mask, sign });
        }
        let mut post = Vec::with_capacity(ech.rank());
        for c in &ech.combos {
            let e = product(&consistent, c, n);
            let (pauli, mask) = split(&e)?;
            debug_assert!(pauli.is_hermitian());
            post.push(SignedRow { pauli, mask });
        }
        if post.len() != kept.len() {
            return Err(Error::Precondition(format!(
                "post-measurement group has rank {} on {} kept qubits",
                post.len(),
                kept.len()
            )));
        }
        Ok(PatternAnalysis {
            measured,
            kept,
            consistent,
            checks,
            post,
        })
    }

    /// Constraints satisfied exactly by the outcome vectors of nonzero probability.
    pub fn outcome_constraints(&self) -> AffineSystem {
        let mut sys = AffineSystem::new(self.measured.len());
        for c in &self.checks {
            sys.push(c.mask.clone(), c.sign == -1);
        }
        sys
    }

    pub fn is_possible(&self, outcome_bits: &BitVec) -> bool {
        self.checks.iter().all(|c| c.holds(outcome_bits))
    }

    /// Post-measurement state on the kept qubits for the given outcome bits.
    pub fn post_state(&self, outcome_bits: &BitVec) -> StabilizerTableau {
        StabilizerTableau {
            n: self.kept.len(),
            generators: self.post.iter().map(|r| r.evaluate(outcome_bits)).collect(),
        }
    }
}

/// Basis of the stabilizer elements whose restriction to every measured qubit is the
/// identity or the measured Pauli.
pub fn consistent_subgroup(t: &StabilizerTableau, m: &MeasurementPattern) -> Result<Vec<PauliString>> {
    if t.num_qubits() != m.num_qubits() {
        return Err(Error::DimensionMismatch {
            expected: t.num_qubits(),
            found: m.num_qubits(),
        });
    }
    let n = t.num_qubits();
    let gens = t.generators();
    let constraints: Vec<BitVec> = m
        .steps()
        .into_iter()
        .map(|(q, basis)| {
            BitVec::from_bools(
                &gens
                    .iter()
                    .map(|g| {
                        let (x, z) = (g.x_bits().get(q), g.z_bits().get(q));
                        match basis {
                            Pauli::X => z,
                            Pauli::Z => x,
                            _ => x ^ z,
                        }
                    })
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    Ok(gf2::right_kernel(&constraints, n)
        .iter()
        .map(|c| product(gens, c, n))
        .collect())
}

/// Parity checks of the graph state `g` under pattern `m`.
pub fn embedded_checks(g: &Graph, m: &MeasurementPattern) -> Result<Vec<ParityCheck>> {
    Ok(PatternAnalysis::new(&StabilizerTableau::from_graph(g), m)?.checks)
}

/// Ideal post-measurement state on the kept qubits of `g` for the observed outcomes.
pub fn target_state(g: &Graph, m: &MeasurementPattern, o: &OutcomeRecord) -> Result<StabilizerTableau> {
    let analysis = PatternAnalysis::new(&StabilizerTableau::from_graph(g), m)?;
    let bits = o.to_bits(&analysis.measured)?;
    if !analysis.is_possible(&bits) {
        return Err(Error::Rejected);
    }
    Ok(analysis.post_state(&bits))
}

/// `|⟨a|b⟩|²` for two stabilizer states: zero on a sign conflict in the shared
/// subgroup, `2^{dim(shared) − n}` otherwise.
pub fn stab_fidelity(a: &StabilizerTableau, b: &StabilizerTableau) -> Result<f64> {
    if a.n != b.n {
        return Err(Error::DimensionMismatch {
            expected: a.n,
            found: b.n,
        });
    }
    let n = a.n;
    let mut rows = symplectic_rows(&a.generators);
    rows.extend(symplectic_rows(&b.generators));
    let ech = Echelon::new(&rows);
    for k in &ech.kernel {
        let ca = BitVec::from_indices(n, k.iter_ones().filter(|&j| j < n));
        let cb = BitVec::from_indices(n, k.iter_ones().filter(|&j| j >= n).map(|j| j - n));
        if product(&a.generators, &ca, n).phase() != product(&b.generators, &cb, n).phase() {
            return Ok(0.0);
        }
    }
    let shared = ech.kernel.len();
    Ok((2.0f64).powi(shared as i32 - n as i32))
}

/// Outcome-dependent fidelity between two analysed post-measurement states on the same
/// kept qubits: `2^{-log2_inv}` when `compat` holds, zero otherwise.
#[derive(Debug, Clone)]
pub struct FidelityForm {
    pub log2_inv: usize,
    pub compat: AffineSystem,
}

pub fn fidelity_form(state: &PatternAnalysis, target: &PatternAnalysis) -> Result<FidelityForm> {
    if state.measured != target.measured {
        return Err(Error::Precondition("analyses use different measured sets".into()));
    }
    let k = state.kept.len();
    let mut rows: Vec<BitVec> = state.post.iter().map(|r| r.pauli.symplectic()).collect();
    rows.extend(target.post.iter().map(|r| r.pauli.symplectic()));
    let ech = Echelon::new(&rows);
    let mut compat = AffineSystem::new(state.measured.len());
    let side = |sel: &mut dyn Iterator<Item = usize>, rows: &[SignedRow]| {
        let mut p = PauliString::identity(k);
        let mut mask = BitVec::zeros(state.measured.len());
        for j in sel {
            p.mul_assign_unchecked(&rows[j].pauli);
            mask.xor_assign(&rows[j].mask);
        }
        (p, mask)
    };
    for c in &ech.kernel {
        let (pa, mut ma) = side(&mut c.iter_ones().filter(|&j| j < k), &state.post);
        let (pb, mb) = side(&mut c.iter_ones().filter(|&j| j >= k).map(|j| j - k), &target.post);
        ma.xor_assign(&mb);
        compat.push(ma, pa.phase() != pb.phase());
    }
    Ok(FidelityForm {
        log2_inv: k - ech.kernel.len(),
        compat,
    })
}

/// One outcome branch of a measurement pattern.
#[derive(Debug, Clone)]
pub struct Branch {
    pub outcome: OutcomeRecord,
    pub probability: f64,
    /// Post-measurement state on the kept qubits.
    pub state: StabilizerTableau,
}

/// Every outcome branch by depth-first sequential measurement. Fails when the number
/// of random outcomes exceeds `max_random`.
pub fn enumerate_branches(
    t: &StabilizerTableau,
    m: &MeasurementPattern,
    max_random: usize,
) -> Result<Vec<Branch>> {
    let steps = m.steps();
    let mut out = Vec::new();
    let mut signs = Vec::with_capacity(steps.len());
    dfs(t.clone(), &steps, 0, 1.0, 0, max_random, &mut signs, &mut out)?;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    t: StabilizerTableau,
    steps: &[(usize, Pauli)],
    depth: usize,
    prob: f64,
    randoms: usize,
    max_random: usize,
    signs: &mut Vec<(usize, i8)>,
    out: &mut Vec<Branch>,
) -> Result<()> {
    if depth == steps.len() {
        out.push(Branch {
            outcome: OutcomeRecord::new(signs.iter().copied())?,
            probability: prob,
            state: t.reduce(steps)?,
        });
        return Ok(());
    }
    let (q, basis) = steps[depth];
    match t.peek(q, basis)? {
        Some(sign) => {
            signs.push((q, sign));
            dfs(t, steps, depth + 1, prob, randoms, max_random, signs, out)?;
            signs.pop();
        }
        None => {
            if randoms + 1 > max_random {
                return Err(Error::TooManyBranches(randoms + 1));
            }
            for sign in [1i8, -1] {
                let mut child = t.clone();
                child.measure_forced(q, basis, sign)?;
                signs.push((q, sign));
                dfs(child, steps, depth + 1, prob * 0.5, randoms + 1, max_random, signs, out)?;
                signs.pop();
            }
        }
    }
    Ok(())
}

/// Outcome of one fusion-check branch.
#[derive(Debug, Clone)]
pub struct FusionReport {
    pub outcome: OutcomeRecord,
    /// Basis used on the `in` vertex.
    pub in_basis: Pauli,
    /// Non-trivial local Cliffords applied before the comparison, as the images of X
    /// and Z on each vertex (original labels). Only `out` and the external
    /// neighbours of `in` are eligible.
    pub local_cliffords: Vec<(usize, (Pauli, Pauli))>,
    /// Post-measurement state after the local Cliffords and the Pauli byproducts.
    pub post: StabilizerTableau,
    /// Graph state with `out` inheriting the external neighbours of `in`.
    pub expected: StabilizerTableau,
    pub matched: bool,
}

/// Images of `X` and `Z` under the six single-qubit Clifford classes (mod Paulis).
const CLIFFORD_IMAGES: [(Pauli, Pauli); 6] = [
    (Pauli::X, Pauli::Z),
    (Pauli::Z, Pauli::X),
    (Pauli::Y, Pauli::Z),
    (Pauli::Z, Pauli::Y),
    (Pauli::X, Pauli::Y),
    (Pauli::Y, Pauli::X),
];

fn map_qubit(p: &PauliString, q: usize, images: (Pauli, Pauli)) -> PauliString {
    let x_img = PauliString::from_paulis(&[images.0]);
    let z_img = PauliString::from_paulis(&[images.1]);
    // Y = iXZ
    let y_img = x_img.multiply(&z_img).expect("single qubit").with_phase(
        (x_img.multiply(&z_img).expect("single qubit").phase() + 1) % 4,
    );
    let img = match p.pauli(q) {
        Pauli::I => return p.clone(),
        Pauli::X => x_img,
        Pauli::Z => z_img,
        Pauli::Y => y_img,
    };
    let mut out = p.clone();
    out.set_pauli(q, img.pauli(0));
    out.with_phase(p.phase() + img.phase())
}

/// Vertices left after the fusion, the expected graph on them, and the external
/// neighbours of `in`.
fn fusion_setup(
    g: &Graph,
    input: usize,
    output: usize,
    m: &MeasurementPattern,
) -> Result<(QubitSubset, Graph, Vec<usize>)> {
    let n = g.num_vertices();
    if m.num_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: m.num_qubits(),
        });
    }
    if input >= n || output >= n || input == output {
        return Err(Error::Precondition("in and out must be distinct vertices".into()));
    }
    if m.basis(input).is_some() || m.basis(output).is_some() {
        return Err(Error::Precondition("in and out must not be measured by the pattern".into()));
    }
    let zset: Vec<usize> = m.steps().into_iter().filter(|s| s.1 == Pauli::Z).map(|s| s.0).collect();
    let xset: Vec<usize> = m.steps().into_iter().filter(|s| s.1 == Pauli::X).map(|s| s.0).collect();
    if xset.len() + zset.len() != m.len() {
        return Err(Error::Precondition("fusion patterns use only X and Z".into()));
    }
    let is_z = |v: usize| m.basis(v) == Some(Pauli::Z);
    let is_x = |v: usize| m.basis(v) == Some(Pauli::X);
    for &v in &xset {
        for w in g.neighbors(v) {
            if !(is_x(w) || is_z(w) || w == input || w == output) {
                return Err(Error::Precondition(format!(
                    "{{in, out}} does not separate X-measured vertex {v} from {w}"
                )));
            }
        }
    }
    let ext = |v: usize| -> Vec<usize> {
        g.neighbors(v)
            .filter(|&w| m.basis(w).is_none() && w != input && w != output)
            .collect()
    };
    let (n_in, n_out) = (ext(input), ext(output));
    if n_in.iter().any(|v| n_out.contains(v)) {
        return Err(Error::Precondition("in and out share an external neighbour".into()));
    }
    let removed: Vec<usize> = m.order().iter().copied().chain([input]).collect();
    let keep = QubitSubset::new(removed, n)?.complement(n);
    let mut big = g.clone();
    for &v in &n_in {
        big.add_edge(output, v)?;
    }
    let mut expected = big.induced(&keep);
    expected.set_terminals(std::iter::empty())?;
    Ok((keep, expected, n_in))
}

/// Basis for the `in` vertex: its Pauli in a consistent element carrying X or Y on both
/// `in` and `out` and only Z or identity on the other unmeasured vertices.
fn fusion_in_basis(g: &Graph, input: usize, output: usize, m: &MeasurementPattern) -> Result<Pauli> {
    let n = g.num_vertices();
    let basis = consistent_subgroup(&StabilizerTableau::from_graph(g), m)?;
    let mut sys = AffineSystem::new(basis.len());
    let xcol = |v: usize| BitVec::from_bools(&basis.iter().map(|b| b.x_bits().get(v)).collect::<Vec<_>>());
    sys.push(xcol(input), true);
    sys.push(xcol(output), true);
    for v in 0..n {
        if v != input && v != output && m.basis(v).is_none() {
            sys.push(xcol(v), false);
        }
    }
    let red = sys
        .reduce()
        .ok_or_else(|| Error::Precondition("no X-chain joins in and out".into()))?;
    let e = product(&basis, &red.particular(), n);
    Ok(e.pauli(input))
}

/// Runs the fusion pattern on one outcome branch chosen by `choose` (called for each
/// random outcome) and compares against the merged-neighbourhood graph state.
fn fuse_with(
    g: &Graph,
    input: usize,
    output: usize,
    m: &MeasurementPattern,
    choose: &mut dyn FnMut() -> i8,
) -> Result<FusionReport> {
    let (keep, expected_graph, n_in) = fusion_setup(g, input, output, m)?;
    let in_basis = fusion_in_basis(g, input, output, m)?;
    let mut steps = m.steps();
    steps.push((input, in_basis));
    let mut t = StabilizerTableau::from_graph(g);
    let mut signs = Vec::with_capacity(steps.len());
    for &(q, b) in &steps {
        let sign = match t.peek(q, b)? {
            Some(s) => s,
            None => choose(),
        };
        t.measure_forced(q, b, sign)?;
        signs.push((q, sign));
    }
    let post = t.reduce(&steps)?;
    let expected = StabilizerTableau::from_graph(&expected_graph);
    let outcome = OutcomeRecord::new(signs)?;
    let mut touched = vec![output];
    touched.extend(n_in);
    if touched.len() > 6 {
        return Err(Error::Unsupported(format!(
            "local Clifford search over {} vertices",
            touched.len()
        )));
    }
    let positions: Vec<usize> = touched
        .iter()
        .map(|&v| keep.position(v).expect("touched vertices are kept"))
        .collect();
    let combos = CLIFFORD_IMAGES.len().pow(touched.len() as u32);
    for code in 0..combos {
        let mut choice = Vec::with_capacity(touched.len());
        let mut c = code;
        for _ in 0..touched.len() {
            choice.push(c % CLIFFORD_IMAGES.len());
            c /= CLIFFORD_IMAGES.len();
        }
        let mapped: Vec<PauliString> = post
            .generators
            .iter()
            .map(|p| {
                positions
                    .iter()
                    .zip(&choice)
                    .fold(p.clone(), |acc, (&q, &k)| map_qubit(&acc, q, CLIFFORD_IMAGES[k]))
            })
            .collect();
        let mut cand = StabilizerTableau {
            n: post.n,
            generators: mapped,
        };
        if !cand.same_unsigned_group(&expected) {
            continue;
        }
        for (v, e) in expected.generators.iter().enumerate() {
            if cand.stabilizer_sign(e)? == Some(-1) {
                cand.apply_local_z(v)?;
            }
        }
        let matched = stab_fidelity(&cand, &expected)? == 1.0;
        let local_cliffords = touched
            .iter()
            .zip(&choice)
            .filter(|(_, &k)| k != 0)
            .map(|(&v, &k)| (v, CLIFFORD_IMAGES[k]))
            .collect();
        return Ok(FusionReport {
            outcome,
            in_basis,
            local_cliffords,
            post: cand,
            expected,
            matched,
        });
    }
    Ok(FusionReport {
        outcome,
        in_basis,
        local_cliffords: Vec::new(),
        post,
        expected,
        matched: false,
    })
}

/// Fusion check on one randomly drawn outcome branch.
pub fn fuse_check<R: Rng + ?Sized>(
    g: &Graph,
    input: usize,
    output: usize,
    m: &MeasurementPattern,
    rng: &mut R,
) -> Result<FusionReport> {
    fuse_with(g, input, output, m, &mut || if rng.random_bool(0.5) { 1 } else { -1 })
}

/// Fusion check on every outcome branch.
pub fn fuse_check_all(
    g: &Graph,
    input: usize,
    output: usize,
    m: &MeasurementPattern,
) -> Result<Vec<FusionReport>> {
    // Random outcomes are visited in binary counting order; the count is discovered
    // on the first pass.
    let mut reports = Vec::new();
    let mut code: u64 = 0;
    loop {
        let mut used = 0u32;
        let report = fuse_with(g, input, output, m, &mut || {
            let bit = (code >> used) & 1;
            used += 1;
            if bit == 1 {
                -1
            } else {
                1
            }
        })?;
        reports.push(report);
        if used >= 40 {
            return Err(Error::TooManyBranches(used as usize));
        }
        code += 1;
        if code >= 1u64 << used {
            break;
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_family, FamilyKind, FamilySpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn p(s: &str) -> PauliString {
        s.parse().unwrap()
    }

    fn square() -> Graph {
        Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (3, 0)], [1, 3]).unwrap()
    }

    fn path4() -> Graph {
        build_family(&FamilySpec::new(FamilyKind::Path, 2)).unwrap()
    }

    fn tab(rows: &[&str]) -> StabilizerTableau {
        StabilizerTableau::from_generators(rows.iter().map(|r| p(r)).collect()).unwrap()
    }

    #[test]
    fn square_generators() {
        let t = StabilizerTableau::from_graph(&square());
        assert_eq!(t.dump(), "+XZIZ\n+ZXZI\n+IZXZ\n+ZIZX\n");
        t.validate().unwrap();
        let empty = StabilizerTableau::from_graph(&Graph::new(3));
        assert_eq!(empty.dump(), "+XII\n+IXI\n+IIX\n");
    }

    #[test]
    fn local_z_flips_x_bearing_generator() {
        let mut t = StabilizerTableau::from_graph(&square());
        t.apply_local_z(0).unwrap();
        assert_eq!(t.dump(), "-XZIZ\n+ZXZI\n+IZXZ\n+ZIZX\n");
        t.apply_local_z(0).unwrap();
        assert_eq!(t, StabilizerTableau::from_graph(&square()));
        assert!(t.apply_local_z(4).is_err());
    }

    #[test]
    fn rejects_invalid_tableaus() {
        assert!(StabilizerTableau::from_generators(vec![p("XI"), p("ZI")]).is_err());
        assert!(StabilizerTableau::from_generators(vec![p("XI"), p("XI")]).is_err());
        assert!(StabilizerTableau::from_generators(vec![p("iXI"), p("IZ")]).is_err());
        assert!(StabilizerTableau::parse_dump("+XX\n+ZZ\n").is_ok());
    }

    #[test]
    fn square_second_x_is_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let mut t = StabilizerTableau::from_graph(&square());
            let a = t.measure(0, Pauli::X, None, &mut rng).unwrap();
            assert!(a.random);
            assert_eq!(t.peek(2, Pauli::X).unwrap(), Some(a.sign));
            let b = t.measure(2, Pauli::X, None, &mut rng).unwrap();
            assert!(!b.random);
            assert_eq!(b.probability, 1.0);
            assert_eq!(b.sign, a.sign);
            let mut again = t.clone();
            assert_eq!(
                again.measure_forced(2, Pauli::X, -a.sign),
                Err(Error::ImpossibleOutcome {
                    qubit: 2,
                    sign: -a.sign
                })
            );
            t.validate().unwrap();
        }
    }

    #[test]
    fn path_bell_after_two_x() {
        let g = path4();
        let m = MeasurementPattern::internal_x(&g);
        for (s1, s2) in [(1, 1), (1, -1), (-1, 1), (-1, -1)] {
            let mut t = StabilizerTableau::from_graph(&g);
            t.measure_forced(1, Pauli::X, s1).unwrap();
            t.measure_forced(2, Pauli::X, s2).unwrap();
            let post = t.reduce(&m.steps()).unwrap();
            // Bell pair stabilized by s2·X₁Z₄ and s1·Z₁X₄.
            let mut expect = tab(&["+XZ", "+ZX"]);
            if s2 == -1 {
                expect.generators[0].negate();
            }
            if s1 == -1 {
                expect.generators[1].negate();
            }
            assert!(post.same_state(&expect), "{post:?} vs {expect:?}");
            let o = OutcomeRecord::new([(1, s1), (2, s2)]).unwrap();
            assert!(target_state(&g, &m, &o).unwrap().same_state(&expect));
        }
    }

    #[test]
    fn broken_path_gives_product_state() {
        let mut g = path4();
        g.remove_edge(1, 2);
        let t = StabilizerTableau::from_graph(&g);
        let m = MeasurementPattern::internal_x(&g);
        let branches = enumerate_branches(&t, &m, 10).unwrap();
        assert_eq!(branches.len(), 4);
        for b in branches {
            let z1 = b.state.stabilizer_sign(&p("ZI")).unwrap();
            let z4 = b.state.stabilizer_sign(&p("IZ")).unwrap();
            assert_eq!(z1, b.outcome.sign(1));
            assert_eq!(z4, b.outcome.sign(2));
            assert_eq!(b.probability, 0.25);
        }
    }

    #[test]
    fn consistent_subgroup_of_path() {
        let g = path4();
        let m = MeasurementPattern::internal_x(&g);
        let t = StabilizerTableau::from_graph(&g);
        let c = consistent_subgroup(&t, &m).unwrap();
        assert_eq!(c.len(), 2);
        for q in &c {
            assert_eq!(t.stabilizer_sign(q).unwrap(), q.sign());
        }
        assert_eq!(t.stabilizer_sign(&p("ZXIX")).unwrap(), Some(1));
        assert_eq!(t.stabilizer_sign(&p("XIXZ")).unwrap(), Some(1));
        let mut rows = c.clone();
        rows.extend([p("ZXIX"), p("XIXZ")]);
        assert_eq!(crate::pauli::gf2_rank(&rows), 2);
        let none = MeasurementPattern::new(4, []).unwrap();
        assert_eq!(consistent_subgroup(&t, &none).unwrap().len(), 4);
    }

    #[test]
    fn embedded_checks_per_family() {
        let twisted = build_family(&FamilySpec::new(FamilyKind::TwistedPair, 3)).unwrap();
        let checks = embedded_checks(&twisted, &MeasurementPattern::internal_x(&twisted)).unwrap();
        let mut supports: Vec<Vec<usize>> = checks.iter().map(|c| c.support.as_slice().to_vec()).collect();
        supports.sort();
        assert_eq!(supports, vec![vec![1, 2], vec![4, 5]]);
        assert!(checks.iter().all(|c| c.sign == 1));

        let path = build_family(&FamilySpec::new(FamilyKind::Path, 5)).unwrap();
        assert!(embedded_checks(&path, &MeasurementPattern::internal_x(&path)).unwrap().is_empty());

        let crazy = build_family(&FamilySpec::new(FamilyKind::Crazy, 3)).unwrap();
        let checks = embedded_checks(&crazy, &MeasurementPattern::internal_x(&crazy)).unwrap();
        assert_eq!(checks.len(), 3);
        let mut supports: Vec<Vec<usize>> = checks.iter().map(|c| c.support.as_slice().to_vec()).collect();
        supports.sort();
        // The reduced basis may mix layers; the span must be the three layer pairs.
        let rows: Vec<BitVec> = checks.iter().map(|c| c.mask.clone()).collect();
        let layers = [
            BitVec::from_indices(6, [0, 1]),
            BitVec::from_indices(6, [2, 3]),
            BitVec::from_indices(6, [4, 5]),
        ];
        let mut all = rows.clone();
        all.extend(layers.iter().cloned());
        assert_eq!(gf2::rank(&all), 3);
    }

    #[test]
    fn consistent_dimension_counts_checks() {
        let crazy = build_family(&FamilySpec::new(FamilyKind::Crazy, 3)).unwrap();
        let m = MeasurementPattern::internal_x(&crazy);
        let a = PatternAnalysis::new(&StabilizerTableau::from_graph(&crazy), &m).unwrap();
        assert_eq!(a.consistent.len(), crazy.num_vertices() - m.len() + a.checks.len());
        // Odd length: Z₀Z₇ with X on one vertex of each odd layer, X₀X₇ with X on one
        // vertex of the even layer.
        let t = StabilizerTableau::from_graph(&crazy);
        for chain in ["ZXIIIXIZ", "ZIXIIXIZ", "ZXIIIIXZ", "XIIXIIIX", "XIIIXIIX"] {
            let q = p(chain);
            assert_eq!(t.stabilizer_sign(&q).unwrap(), Some(1), "{chain}");
            assert_eq!(crate::pauli::gf2_rank(&[a.consistent.clone(), vec![q]].concat()), a.consistent.len());
        }
    }

    #[test]
    fn fidelity_examples() {
        let bell = tab(&["+XX", "+ZZ"]);
        let prod = tab(&["+ZI", "+IZ"]);
        assert_eq!(stab_fidelity(&bell, &bell).unwrap(), 1.0);
        assert_eq!(stab_fidelity(&bell, &prod).unwrap(), 0.5);
        let anti = tab(&["+ZI", "-IZ"]);
        assert_eq!(stab_fidelity(&bell, &anti).unwrap(), 0.0);
        let plus = tab(&["+XI", "+IX"]);
        assert_eq!(stab_fidelity(&prod, &plus).unwrap(), 0.25);
        assert!(stab_fidelity(&bell, &StabilizerTableau::zero_state(3)).is_err());
    }

    #[test]
    fn subgroup_route_matches_measurement_route() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for kind in [FamilyKind::Path, FamilyKind::Crazy, FamilyKind::TwistedPair] {
            let g = build_family(&FamilySpec::new(kind, 3)).unwrap();
            let m = MeasurementPattern::internal_x(&g);
            let t = StabilizerTableau::from_graph(&g);
            let analysis = PatternAnalysis::new(&t, &m).unwrap();
            for b in enumerate_branches(&t, &m, 16).unwrap() {
                let bits = b.outcome.to_bits(&m.measured()).unwrap();
                assert!(analysis.is_possible(&bits));
                assert!(analysis.post_state(&bits).same_state(&b.state));
            }
            let mut s = t.clone();
            for (q, basis) in m.steps() {
                s.measure(q, basis, None, &mut rng).unwrap();
                s.validate().unwrap();
            }
        }
    }

    #[test]
    fn rejected_outcomes() {
        let g = build_family(&FamilySpec::new(FamilyKind::TwistedPair, 1)).unwrap();
        let m = MeasurementPattern::internal_x(&g);
        let bad = OutcomeRecord::new([(1, 1), (2, -1)]).unwrap();
        assert_eq!(target_state(&g, &m, &bad), Err(Error::Rejected));
        let good = OutcomeRecord::new([(1, -1), (2, -1)]).unwrap();
        assert_eq!(target_state(&g, &m, &good).unwrap().num_qubits(), 2);
    }

    #[test]
    fn fidelity_form_matches_pairwise_fidelity() {
        let ideal = build_family(&FamilySpec::new(FamilyKind::Crazy, 2)).unwrap();
        let m = MeasurementPattern::internal_x(&ideal);
        let target = PatternAnalysis::new(&StabilizerTableau::from_graph(&ideal), &m).unwrap();
        for (a, b) in ideal.edges() {
            let mut g = ideal.clone();
            g.remove_edge(a, b);
            let noisy = PatternAnalysis::new(&StabilizerTableau::from_graph(&g), &m).unwrap();
            let form = fidelity_form(&noisy, &target).unwrap();
            for k in 0..(1u32 << m.len()) {
                let bits = BitVec::from_bools(&(0..m.len()).map(|i| (k >> i) & 1 == 1).collect::<Vec<_>>());
                if !noisy.is_possible(&bits) || !target.is_possible(&bits) {
                    continue;
                }
                let direct = stab_fidelity(&noisy.post_state(&bits), &target.post_state(&bits)).unwrap();
                let via_form = if form.compat.is_satisfied_by(&bits) {
                    (0.5f64).powi(form.log2_inv as i32)
                } else {
                    0.0
                };
                assert_eq!(direct, via_form);
            }
        }
    }

    #[test]
    fn branch_limit() {
        let g = build_family(&FamilySpec::new(FamilyKind::Path, 6)).unwrap();
        let t = StabilizerTableau::from_graph(&g);
        let m = MeasurementPattern::internal_x(&g);
        assert_eq!(enumerate_branches(&t, &m, 3).unwrap_err(), Error::TooManyBranches(4));
        assert_eq!(enumerate_branches(&t, &m, 6).unwrap().len(), 64);
    }

    #[test]
    fn clifford_images_are_valid() {
        for img in CLIFFORD_IMAGES {
            let x = map_qubit(&p("X"), 0, img);
            let y = map_qubit(&p("Y"), 0, img);
            let z = map_qubit(&p("Z"), 0, img);
            assert!(x.is_hermitian() && y.is_hermitian() && z.is_hermitian());
            // XY = iZ must be preserved.
            assert_eq!(x.multiply(&y).unwrap(), z.clone().with_phase(z.phase() + 1));
        }
    }

    #[test]
    fn fusion_on_two_paths() {
        // 0-1-2-3-4-5-6: in = 2, out = 4, X on 3; external 1 and 5.
        let g = build_family(&FamilySpec::new(FamilyKind::Path, 5)).unwrap();
        let m = MeasurementPattern::all_x(7, [3]).unwrap();
        let reports = fuse_check_all(&g, 2, 4, &m).unwrap();
        assert_eq!(reports.len(), 4);
        assert!(reports.iter().all(|r| r.matched));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert!(fuse_check(&g, 2, 4, &m, &mut rng).unwrap().matched);
        // Even X-path.
        let m2 = MeasurementPattern::all_x(7, [2, 3]).unwrap();
        let reports = fuse_check_all(&g, 1, 4, &m2).unwrap();
        assert!(reports.iter().all(|r| r.matched), "{reports:?}");
    }

    #[test]
    fn fusion_preconditions() {
        let g = build_family(&FamilySpec::new(FamilyKind::Path, 5)).unwrap();
        let m = MeasurementPattern::all_x(7, [3]).unwrap();
        assert!(fuse_check_all(&g, 2, 2, &m).is_err());
        assert!(fuse_check_all(&g, 3, 4, &m).is_err());
        // Vertex 2 measured but 1 neither measured nor in/out.
        let leak = MeasurementPattern::all_x(7, [2, 3]).unwrap();
        assert!(fuse_check_all(&g, 0, 4, &leak).is_err());
    }

    /// Whether some single-qubit Clifford on each kept qubit maps `post` into the
    /// unsigned group of `expected`.
    fn lc_equivalent_any(post: &StabilizerTableau, expected: &StabilizerTableau) -> bool {
        let k = post.n;
        (0..CLIFFORD_IMAGES.len().pow(k as u32)).any(|code| {
            let mut c = code;
            let mut gens = post.generators.clone();
            for q in 0..k {
                let img = CLIFFORD_IMAGES[c % CLIFFORD_IMAGES.len()];
                c /= CLIFFORD_IMAGES.len();
                gens = gens.iter().map(|p| map_qubit(p, q, img)).collect();
            }
            StabilizerTableau { n: k, generators: gens }.same_unsigned_group(expected)
        })
    }

    #[test]
    fn edge_frame_with_two_external_neighbours_does_not_merge() {
        // Crazy n=2 leaves X_in Z_out and Z_in X_out: an in-out edge. With two external
        // neighbours on `in`, no Pauli measurement of `in` reaches the merged graph.
        let crazy = build_family(&FamilySpec::new(FamilyKind::Crazy, 2)).unwrap();
        let mut edges = crazy.edges();
        edges.extend([(0, 6), (0, 7), (5, 8), (5, 9), (7, 8)]);
        let g = Graph::from_edges(10, edges, [0, 5]).unwrap();
        let m = MeasurementPattern::all_x(10, crazy.internal().iter()).unwrap();
        let (_, merged, _) = fusion_setup(&g, 0, 5, &m).unwrap();
        let expected = StabilizerTableau::from_graph(&merged);
        for basis in [Pauli::X, Pauli::Y, Pauli::Z] {
            let mut steps = m.steps();
            steps.push((0, basis));
            let mut t = StabilizerTableau::from_graph(&g);
            for &(q, b) in &steps {
                let s = t.peek(q, b).unwrap().unwrap_or(1);
                t.measure_forced(q, b, s).unwrap();
            }
            let post = t.reduce(&steps).unwrap();
            assert!(!lc_equivalent_any(&post, &expected), "{basis:?}");
        }
        // One external neighbour on `in`: the Y measurement merges.
        let mut edges = crazy.edges();
        edges.extend([(0, 6), (5, 7), (5, 8), (6, 9), (9, 8)]);
        let g = Graph::from_edges(10, edges, [0, 5]).unwrap();
        let m = MeasurementPattern::all_x(10, crazy.internal().iter()).unwrap();
        assert!(fuse_check_all(&g, 0, 5, &m).unwrap().iter().all(|r| r.matched));
    }
}
