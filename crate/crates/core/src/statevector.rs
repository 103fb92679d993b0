//! Dense amplitude simulation of weighted graph states, single-qubit projections,
//! Pauli expectation values and the correlated-phase averages.
//!
//! Qubit `q` is bit `q` of the amplitude index. States may be unnormalised; callers
//! that need probabilities read the squared norm explicitly.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::{Read, Write};

use gauss_quad::GaussHermite;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::graph::{Graph, WeightedGraph};
use crate::pauli::{Pauli, PauliString, QubitSubset};
use crate::stabilizer::{MeasurementPattern, PatternAnalysis, StabilizerTableau};

/// Default qubit cap: 2²² amplitudes.
pub const DEFAULT_CAP: usize = 22;

const PAR_THRESHOLD: usize = 1 << 14;

#[derive(Clone, PartialEq)]
pub struct StateVector {
    n: usize,
    amps: Vec<Complex64>,
}

impl std::fmt::Debug for StateVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StateVector")
            .field("n", &self.n)
            .field("norm_sqr", &self.norm_sqr())
            .finish()
    }
}

fn check_cap(n: usize, cap: usize) -> Result<()> {
    if n > cap || n > 40 {
        return Err(Error::CapExceeded { n, cap: cap.min(40) });
    }
    Ok(())
}

/// Low 64 bits of a packed bit vector; statevectors never exceed 40 qubits.
fn mask64(bits: &BitVec) -> u64 {
    bits.words().first().copied().unwrap_or(0)
}

fn i_pow(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n: usize) -> Result<Self> {
        check_cap(n, DEFAULT_CAP)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { n, amps })
    }

    /// `|+⟩^{⊗n}`.
    pub fn plus(n: usize) -> Result<Self> {
        check_cap(n, DEFAULT_CAP)?;
        let a = (0.5f64).powf(n as f64 / 2.0);
        Ok(StateVector {
            n,
            amps: vec![Complex64::new(a, 0.0); 1 << n],
        })
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let len = amps.len();
        if len == 0 || !len.is_power_of_two() {
            return Err(Error::Domain(format!("amplitude count {len} is not a power of two")));
        }
        Ok(StateVector {
            n: len.trailing_zeros() as usize,
            amps,
        })
    }

    /// `∏_e CP_e(φ_e) |+⟩^{⊗n}` with `CP(φ) = diag(1, 1, 1, e^{iφ})`.
    pub fn build_weighted(wg: &WeightedGraph, cap: usize) -> Result<Self> {
        let n = wg.base().num_vertices();
        check_cap(n, cap)?;
        let edges: Vec<(u64, f64)> = wg
            .phases()
            .map(|((a, b), phi)| ((1u64 << a) | (1u64 << b), phi))
            .collect();
        let norm = (0.5f64).powf(n as f64 / 2.0);
        let uniform = edges.windows(2).all(|w| w[0].1 == w[1].1);
        let table: Vec<Complex64> = if uniform {
            let phi = edges.first().map_or(0.0, |e| e.1);
            (0..=edges.len())
                .map(|k| Complex64::from_polar(norm, phi * k as f64))
                .collect()
        } else {
            Vec::new()
        };
        let amp = |idx: usize| -> Complex64 {
            let idx = idx as u64;
            if uniform {
                let count = edges.iter().filter(|(m, _)| idx & m == *m).count();
                table[count]
            } else {
                let phase: f64 = edges.iter().filter(|(m, _)| idx & m == *m).map(|e| e.1).sum();
                Complex64::from_polar(norm, phase)
            }
        };
        let dim = 1usize << n;
        let amps: Vec<Complex64> = if dim >= PAR_THRESHOLD {
            (0..dim).into_par_iter().map(amp).collect()
        } else {
            (0..dim).map(amp).collect()
        };
        Ok(StateVector { n, amps })
    }

    /// Graph state `|G⟩`.
    pub fn from_graph(g: &Graph) -> Result<Self> {
        Self::build_weighted(&WeightedGraph::ideal(g.clone()), DEFAULT_CAP)
    }

    #[inline]
    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    pub fn normalized(&self) -> Option<StateVector> {
        let n2 = self.norm_sqr();
        (n2 > 0.0).then(|| {
            let s = 1.0 / n2.sqrt();
            StateVector {
                n: self.n,
                amps: self.amps.iter().map(|a| a * s).collect(),
            }
        })
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<Complex64> {
        self.check_dims(other.n)?;
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }

    fn check_dims(&self, n: usize) -> Result<()> {
        if n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: n,
            });
        }
        Ok(())
    }

    /// `P|ψ⟩` with `P|b⟩ = i^{k + |x∧z|} (−1)^{|b∧z|} |b ⊕ x⟩`.
    pub fn apply_pauli(&self, p: &PauliString) -> Result<StateVector> {
        self.check_dims(p.num_qubits())?;
        let x = mask64(p.x_bits());
        let z = mask64(p.z_bits());
        let global = i_pow(p.phase() as u32 + (x & z).count_ones());
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for (b, a) in self.amps.iter().enumerate() {
            let sign = if ((b as u64) & z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            out[b ^ x as usize] = a * global * sign;
        }
        Ok(StateVector { n: self.n, amps: out })
    }

    /// Multiplies amplitudes with both bits set by `e^{iφ}`.
    pub fn apply_controlled_phase(&mut self, a: usize, b: usize, phi: f64) -> Result<()> {
        for q in [a, b] {
            if q >= self.n {
                return Err(Error::QubitOutOfRange { index: q, n: self.n });
            }
        }
        let m = (1usize << a) | (1usize << b);
        let f = Complex64::from_polar(1.0, phi);
        for (idx, amp) in self.amps.iter_mut().enumerate() {
            if idx & m == m {
                *amp *= f;
            }
        }
        Ok(())
    }

    /// Applies the 2×2 matrix `[[m00, m01], [m10, m11]]` to qubit `q`.
    pub fn apply_single(&mut self, q: usize, m: [[Complex64; 2]; 2]) -> Result<()> {
        if q >= self.n {
            return Err(Error::QubitOutOfRange { index: q, n: self.n });
        }
        let bit = 1usize << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a0, a1) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = m[0][0] * a0 + m[0][1] * a1;
                self.amps[i | bit] = m[1][0] * a0 + m[1][1] * a1;
            }
        }
        Ok(())
    }

    /// Rotates qubit `q` so that the `+1` eigenvector of `basis` becomes `|0⟩`.
    fn rotate_to_z(&mut self, q: usize, basis: Pauli) -> Result<()> {
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let hadamard = [[h, h], [h, -h]];
        match basis {
            Pauli::Z => Ok(()),
            Pauli::X => self.apply_single(q, hadamard),
            Pauli::Y => {
                let one = Complex64::new(1.0, 0.0);
                let zero = Complex64::new(0.0, 0.0);
                self.apply_single(q, [[one, zero], [zero, Complex64::new(0.0, -1.0)]])?;
                self.apply_single(q, hadamard)
            }
            Pauli::I => Err(Error::Domain("measurement basis must be X, Y or Z".into())),
        }
    }

    /// `½(1 + s·P_q)|ψ⟩` and its squared norm.
    pub fn project(&self, q: usize, basis: Pauli, sign: i8) -> Result<(f64, StateVector)> {
        if q >= self.n {
            return Err(Error::QubitOutOfRange { index: q, n: self.n });
        }
        if sign != 1 && sign != -1 {
            return Err(Error::Domain(format!("outcome sign must be +1 or -1, got {sign}")));
        }
        let p = PauliString::single(self.n, q, basis)?;
        let pp = self.apply_pauli(&p)?;
        let s = sign as f64;
        let amps: Vec<Complex64> = self
            .amps
            .iter()
            .zip(&pp.amps)
            .map(|(a, b)| (a + b * s) * 0.5)
            .collect();
        let out = StateVector { n: self.n, amps };
        Ok((out.norm_sqr(), out))
    }

    /// `⟨ψ|P|ψ⟩` (real part), without normalisation.
    pub fn expval(&self, p: &PauliString) -> Result<f64> {
        Ok(self.inner(&self.apply_pauli(p)?)?.re)
    }

    /// `⟨ψ| ∏_k (1 + Q_k)/2 |ψ⟩` over the generators of `t`, without normalisation.
    pub fn stabilizer_weight(&self, t: &StabilizerTableau) -> Result<f64> {
        self.check_dims(t.num_qubits())?;
        let mut phi = self.clone();
        for g in t.generators() {
            let gphi = phi.apply_pauli(g)?;
            for (a, b) in phi.amps.iter_mut().zip(&gphi.amps) {
                *a = (*a + b) * 0.5;
            }
        }
        Ok(phi.norm_sqr())
    }

    /// Overlap with the stabilizer state of `t`, normalised by `‖ψ‖²`.
    pub fn fidelity_to_tableau(&self, t: &StabilizerTableau) -> Result<f64> {
        let n2 = self.norm_sqr();
        if n2 == 0.0 {
            return Err(Error::Domain("fidelity of the zero vector".into()));
        }
        Ok(self.stabilizer_weight(t)? / n2)
    }

    /// Unnormalised post-measurement states for every outcome of the measurements,
    /// living on the remaining qubits (ascending). Entry `o` has bit `k` of `o` set when
    /// the `k`-th measured qubit (ascending) gave `-1`.
    pub fn branch_states(&self, measured: &[(usize, Pauli)]) -> Result<Vec<StateVector>> {
        let subset = QubitSubset::new(measured.iter().map(|m| m.0), self.n)?;
        let mut rotated = self.clone();
        for &(q, b) in measured {
            rotated.rotate_to_z(q, b)?;
        }
        let kept = subset.complement(self.n);
        let deposit = |code: usize, positions: &[usize]| -> usize {
            positions
                .iter()
                .enumerate()
                .filter(|(k, _)| (code >> k) & 1 == 1)
                .map(|(_, &q)| 1usize << q)
                .sum()
        };
        let kmap: Vec<usize> = (0..1usize << kept.len()).map(|r| deposit(r, kept.as_slice())).collect();
        Ok((0..1usize << subset.len())
            .map(|o| {
                let base = deposit(o, subset.as_slice());
                StateVector {
                    n: kept.len(),
                    amps: kmap.iter().map(|&k| rotated.amps[base | k]).collect(),
                }
            })
            .collect())
    }

    /// Little-endian `(re, im)` pairs of 64-bit floats in index order.
    pub fn write_amplitudes<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for a in &self.amps {
            w.write_all(&a.re.to_le_bytes())?;
            w.write_all(&a.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_amplitudes<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)
            .map_err(|e| Error::Parse(format!("amplitude dump: {e}")))?;
        if buf.len() % 16 != 0 {
            return Err(Error::Parse("amplitude dump length is not a multiple of 16".into()));
        }
        let amps = buf
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
                let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
                Complex64::new(re, im)
            })
            .collect();
        Self::from_amplitudes(amps)
    }
}

/// Dense `2ⁿ × 2ⁿ` operator accumulator; terms may carry negative weights.
#[derive(Debug, Clone)]
pub struct DensityAccumulator {
    n: usize,
    matrix: Vec<Complex64>,
    trace: f64,
}

impl DensityAccumulator {
    pub fn new(n: usize) -> Result<Self> {
        check_cap(n, 12)?;
        let dim = 1usize << n;
        Ok(DensityAccumulator {
            n,
            matrix: vec![Complex64::new(0.0, 0.0); dim * dim],
            trace: 0.0,
        })
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// `ρ += w |ψ⟩⟨ψ|`.
    pub fn add_pure(&mut self, weight: f64, psi: &StateVector) -> Result<()> {
        if psi.n != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: psi.n,
            });
        }
        let dim = psi.amps.len();
        for (i, a) in psi.amps.iter().enumerate() {
            let wa = a * weight;
            let row = &mut self.matrix[i * dim..(i + 1) * dim];
            for (m, b) in row.iter_mut().zip(&psi.amps) {
                *m += wa * b.conj();
            }
        }
        self.trace += weight * psi.norm_sqr();
        Ok(())
    }

    /// Trace tracked while accumulating.
    pub fn tracked_trace(&self) -> f64 {
        self.trace
    }

    /// Trace read off the diagonal.
    pub fn trace(&self) -> f64 {
        let dim = 1usize << self.n;
        (0..dim).map(|i| self.matrix[i * dim + i].re).sum()
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.matrix[row * (1usize << self.n) + col]
    }

    pub fn max_hermiticity_defect(&self) -> f64 {
        let dim = 1usize << self.n;
        let mut worst = 0.0f64;
        for i in 0..dim {
            for j in 0..dim {
                worst = worst.max((self.matrix[i * dim + j] - self.matrix[j * dim + i].conj()).norm());
            }
        }
        worst
    }

    /// `Tr(ρ P)` (real part).
    pub fn expval(&self, p: &PauliString) -> Result<f64> {
        if p.num_qubits() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: p.num_qubits(),
            });
        }
        let x = mask64(p.x_bits()) as usize;
        let z = mask64(p.z_bits()) as usize;
        let global = i_pow(p.phase() as u32 + (x & z).count_ones());
        let dim = 1usize << self.n;
        let mut acc = Complex64::new(0.0, 0.0);
        for b in 0..dim {
            let sign = if (b & z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            acc += self.matrix[b * dim + (b ^ x)] * global * sign;
        }
        Ok(acc.re)
    }
}

/// Lowest-order signed decomposition of the correlated-phase ensemble:
/// `(1 − p|E|)|G⟩⟨G| + p Σ_e |G−e⟩⟨G−e| + (p/2) Σ_{e≠e'} Σ_{s,s'} s s' CS^s_e CS^{s'}_{e'}[|G⟩⟨G|]`
/// with `√CZ^± = diag(1, 1, 1, ±i)`.
pub fn correlated_loworder_density(g: &Graph, p: f64) -> Result<DensityAccumulator> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} not in [0, 1]")));
    }
    let n = g.num_vertices();
    let mut rho = DensityAccumulator::new(n)?;
    let ideal = StateVector::from_graph(g)?;
    let edges = g.edges();
    rho.add_pure(1.0 - p * edges.len() as f64, &ideal)?;
    if p == 0.0 {
        return Ok(rho);
    }
    for &(a, b) in &edges {
        let mut sub = g.clone();
        sub.remove_edge(a, b);
        rho.add_pure(p, &StateVector::from_graph(&sub)?)?;
    }
    // Ordered pairs counted once per unordered pair with weight p instead of p/2.
    for (i, &e) in edges.iter().enumerate() {
        for &f in &edges[i + 1..] {
            for s in [1.0f64, -1.0] {
                for t in [1.0f64, -1.0] {
                    let mut psi = ideal.clone();
                    psi.apply_controlled_phase(e.0, e.1, s * PI / 2.0)?;
                    psi.apply_controlled_phase(f.0, f.1, t * PI / 2.0)?;
                    rho.add_pure(p * s * t, &psi)?;
                }
            }
        }
    }
    Ok(rho)
}

/// Distribution of the shared phase offset `ε` in the correlated model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseDistribution {
    /// `ε ~ N(0, σ²)`, integrated by Gauss–Hermite quadrature with `nodes` points.
    Gaussian { sigma: f64, nodes: usize },
    /// Point mass at a fixed `ε`.
    Fixed(f64),
}

impl PhaseDistribution {
    pub fn gaussian(sigma: f64) -> Self {
        PhaseDistribution::Gaussian { sigma, nodes: 41 }
    }

    /// `(ε_k, w_k)` with `Σ w_k = 1`.
    pub fn nodes(&self) -> Result<Vec<(f64, f64)>> {
        match *self {
            PhaseDistribution::Fixed(eps) => Ok(vec![(eps, 1.0)]),
            PhaseDistribution::Gaussian { sigma, nodes } => {
                if !sigma.is_finite() || sigma < 0.0 {
                    return Err(Error::Domain(format!("phase standard deviation {sigma}")));
                }
                if sigma == 0.0 {
                    return Ok(vec![(0.0, 1.0)]);
                }
                let rule = GaussHermite::new(nodes)
                    .map_err(|e| Error::Domain(format!("Gauss-Hermite rule: {e}")))?;
                let scale = 1.0 / PI.sqrt();
                Ok(rule
                    .into_node_weight_pairs()
                    .into_iter()
                    .map(|(x, w)| (std::f64::consts::SQRT_2 * sigma * x, w * scale))
                    .collect())
            }
        }
    }
}

/// Accepted-branch sums for one correlated-phase realisation, or their average.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseAverage {
    /// `Σ_accepted ‖v_b‖²`.
    pub acceptance: f64,
    /// `Σ_accepted ⟨v_b| Π_{target(b)} |v_b⟩`; branches the ideal state cannot produce
    /// contribute zero.
    pub weighted_fidelity: f64,
    /// `Σ_accepted ⟨v_b|O_j|v_b⟩` for each requested observable.
    pub observables: Vec<f64>,
}

impl PhaseAverage {
    pub fn zero(k: usize) -> Self {
        PhaseAverage {
            acceptance: 0.0,
            weighted_fidelity: 0.0,
            observables: vec![0.0; k],
        }
    }

    pub fn add_scaled(&mut self, other: &PhaseAverage, w: f64) {
        self.acceptance += w * other.acceptance;
        self.weighted_fidelity += w * other.weighted_fidelity;
        for (a, b) in self.observables.iter_mut().zip(&other.observables) {
            *a += w * b;
        }
    }

    /// Acceptance-conditioned fidelity, `None` when nothing is accepted.
    pub fn mean_fidelity(&self) -> Option<f64> {
        (self.acceptance > 0.0).then(|| self.weighted_fidelity / self.acceptance)
    }
}

/// Branch sums of the weighted graph state with every phase equal to `π + ε`.
pub fn correlated_branch_sums(
    g: &Graph,
    eps: f64,
    pattern: &MeasurementPattern,
    ideal: &PatternAnalysis,
    accept: &(dyn Fn(&BitVec) -> bool + Sync),
    observables: &[PauliString],
    cap: usize,
) -> Result<PhaseAverage> {
    let wg = WeightedGraph::uniform(g.clone(), PI + eps);
    let psi = StateVector::build_weighted(&wg, cap)?;
    branch_sums(&psi, pattern, ideal, accept, observables)
}

/// Accepted-branch sums of `psi` under the pattern, with targets from `ideal`.
pub fn branch_sums(
    psi: &StateVector,
    pattern: &MeasurementPattern,
    ideal: &PatternAnalysis,
    accept: &(dyn Fn(&BitVec) -> bool + Sync),
    observables: &[PauliString],
) -> Result<PhaseAverage> {
    let mut steps = pattern.steps();
    steps.sort_unstable_by_key(|s| s.0);
    let branches = psi.branch_states(&steps)?;
    let m = steps.len();
    let mut out = PhaseAverage::zero(observables.len());
    for (code, v) in branches.iter().enumerate() {
        let bits = BitVec::from_bools(&(0..m).map(|k| (code >> k) & 1 == 1).collect::<Vec<_>>());
        if !accept(&bits) {
            continue;
        }
        out.acceptance += v.norm_sqr();
        if ideal.is_possible(&bits) {
            out.weighted_fidelity += v.stabilizer_weight(&ideal.post_state(&bits))?;
        }
        for (acc, o) in out.observables.iter_mut().zip(observables) {
            *acc += v.expval(o)?;
        }
    }
    Ok(out)
}

/// Averages [`correlated_branch_sums`] over the phase distribution.
pub fn gaussian_phase_average(
    g: &Graph,
    dist: &PhaseDistribution,
    pattern: &MeasurementPattern,
    accept: &(dyn Fn(&BitVec) -> bool + Sync),
    observables: &[PauliString],
    cap: usize,
) -> Result<PhaseAverage> {
    let ideal = PatternAnalysis::new(&StabilizerTableau::from_graph(g), pattern)?;
    let nodes = dist.nodes()?;
    let parts = nodes
        .par_iter()
        .map(|&(eps, w)| {
            correlated_branch_sums(g, eps, pattern, &ideal, accept, observables, cap).map(|r| (r, w))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut total = PhaseAverage::zero(observables.len());
    for (r, w) in &parts {
        total.add_scaled(r, *w);
    }
    Ok(total)
}
