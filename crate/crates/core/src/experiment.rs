//! Extraction runs, postselected mean fidelities and fidelity susceptibilities.
//!
//! Every realisation of a noisy state is scored by exact sums over its outcome
//! branches: `B` is the probability that the outcome passes postselection and `A` the
//! probability-weighted fidelity of the accepted branches. The mean fidelity is
//! `ΣA / ΣB` over realisations.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use itertools::Itertools;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bits::BitVec;
use crate::error::{Error, Result};
use crate::gf2::AffineSystem;
use crate::graph::{build_family, FamilySpec, Graph, WeightedGraph};
use crate::noise::{realize_state, sample_realization, NoiseKind, NoiseModel, NoiseRealization, PreparedState};
use crate::stabilizer::{
    fidelity_form, stab_fidelity, MeasurementPattern, OutcomeRecord, PatternAnalysis, StabilizerTableau,
};
use crate::statevector::{self, PhaseDistribution, StateVector, DEFAULT_CAP};

/// Samples per work unit; fixed so that results do not depend on the thread count.
const CHUNK: u64 = 256;

/// Largest number of defect configurations enumerated exactly.
const MAX_DEFECT_CONFIGS: usize = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostSelect {
    /// Keep outcomes satisfying every embedded check of the ideal graph.
    StabilizerChecks,
    /// Keep only the all-`−1` outcome.
    AllMinus,
    /// Keep only the all-`+1` outcome.
    AllPlus,
    /// Keep everything.
    None,
}

impl PostSelect {
    pub fn name(self) -> &'static str {
        match self {
            PostSelect::StabilizerChecks => "stabilizer_checks",
            PostSelect::AllMinus => "all_minus",
            PostSelect::AllPlus => "all_plus",
            PostSelect::None => "none",
        }
    }
}

impl fmt::Display for PostSelect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PostSelect {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stabilizer_checks" | "checks" => Ok(PostSelect::StabilizerChecks),
            "all_minus" | "minus" => Ok(PostSelect::AllMinus),
            "all_plus" | "plus" => Ok(PostSelect::AllPlus),
            "none" => Ok(PostSelect::None),
            _ => Err(Error::Parse(format!("unknown postselection mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetKind {
    Bell,
    Ghz,
}

/// Acceptance probability and weighted fidelity of one prepared state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BranchSums {
    pub acceptance: f64,
    pub weighted_fidelity: f64,
}

impl BranchSums {
    pub fn fidelity(&self) -> Option<f64> {
        (self.acceptance > 0.0).then(|| self.weighted_fidelity / self.acceptance)
    }
}

/// A template graph, a measurement pattern and a postselection rule.
#[derive(Debug, Clone)]
pub struct ExtractionProtocol {
    family: Option<FamilySpec>,
    graph: Graph,
    pattern: MeasurementPattern,
    postselect: PostSelect,
    target: TargetKind,
    ideal: PatternAnalysis,
    accept: AffineSystem,
    ideal_sums: BranchSums,
    cap: usize,
}

impl ExtractionProtocol {
    /// Family template with `X` on every internal vertex.
    pub fn new(family: FamilySpec, postselect: PostSelect) -> Result<Self> {
        let g = build_family(&family)?;
        let m = MeasurementPattern::internal_x(&g);
        let mut proto = Self::from_parts(g, m, postselect)?;
        proto.family = Some(family);
        Ok(proto)
    }

    pub fn from_parts(graph: Graph, pattern: MeasurementPattern, postselect: PostSelect) -> Result<Self> {
        graph.validate()?;
        if pattern.num_qubits() != graph.num_vertices() {
            return Err(Error::DimensionMismatch {
                expected: graph.num_vertices(),
                found: pattern.num_qubits(),
            });
        }
        if pattern.measured() != graph.internal() {
            return Err(Error::Precondition(
                "the pattern must measure exactly the internal vertices".into(),
            ));
        }
        let target = match graph.terminals().len() {
            2 => TargetKind::Bell,
            k if k > 2 => TargetKind::Ghz,
            k => return Err(Error::InvalidGraph(format!("{k} terminals; extraction needs at least 2"))),
        };
        let ideal_tableau = StabilizerTableau::from_graph(&graph);
        let ideal = PatternAnalysis::new(&ideal_tableau, &pattern)?;
        let m = ideal.measured.len();
        let mut accept = AffineSystem::new(m);
        if postselect != PostSelect::None {
            accept.extend(&ideal.outcome_constraints());
        }
        let uniform = match postselect {
            PostSelect::AllMinus => Some(true),
            PostSelect::AllPlus => Some(false),
            _ => None,
        };
        if let Some(bit) = uniform {
            let all = if bit { BitVec::ones(m) } else { BitVec::zeros(m) };
            if !ideal.is_possible(&all) {
                return Err(Error::Precondition(format!(
                    "the uniform outcome required by {postselect} violates an embedded check"
                )));
            }
            for k in 0..m {
                accept.push(BitVec::from_indices(m, [k]), bit);
            }
        }
        let mut proto = ExtractionProtocol {
            family: None,
            graph,
            pattern,
            postselect,
            target,
            ideal,
            accept,
            ideal_sums: BranchSums::default(),
            cap: DEFAULT_CAP,
        };
        proto.ideal_sums = proto.tableau_sums(&ideal_tableau)?;
        Ok(proto)
    }

    /// Qubit cap for statevector simulation.
    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn family(&self) -> Option<&FamilySpec> {
        self.family.as_ref()
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn pattern(&self) -> &MeasurementPattern {
        &self.pattern
    }

    pub fn postselect(&self) -> PostSelect {
        self.postselect
    }

    pub fn target(&self) -> TargetKind {
        self.target
    }

    /// Analysis of the ideal graph under the pattern; its post rows define the targets.
    pub fn ideal(&self) -> &PatternAnalysis {
        &self.ideal
    }

    /// Outcome bits (bit `k` set when the `k`-th measured qubit gave `−1`) that pass.
    pub fn accepts(&self, bits: &BitVec) -> bool {
        self.accept.is_satisfied_by(bits)
    }

    /// Acceptance probability of the noiseless state.
    pub fn ideal_acceptance(&self) -> f64 {
        self.ideal_sums.acceptance
    }

    /// Target on the kept qubits for the outcome, `None` when the ideal state cannot
    /// produce it.
    pub fn target_for(&self, bits: &BitVec) -> Option<StabilizerTableau> {
        self.ideal.is_possible(bits).then(|| self.ideal.post_state(bits))
    }

    /// Exact branch sums of a stabilizer state. Possible outcomes of a stabilizer state
    /// form an affine space and are equally likely, so both sums are solution counts.
    pub fn tableau_sums(&self, t: &StabilizerTableau) -> Result<BranchSums> {
        let state = PatternAnalysis::new(t, &self.pattern)?;
        let mut sys = state.outcome_constraints();
        let all = sys.log2_solutions().expect("a physical state has possible outcomes") as i32;
        sys.extend(&self.accept);
        let Some(acc) = sys.log2_solutions() else {
            return Ok(BranchSums::default());
        };
        let form = fidelity_form(&state, &self.ideal)?;
        sys.extend(&self.ideal.outcome_constraints());
        sys.extend(&form.compat);
        let weighted = sys
            .log2_solutions()
            .map_or(0.0, |l| 2f64.powi(l as i32 - all - form.log2_inv as i32));
        Ok(BranchSums {
            acceptance: 2f64.powi(acc as i32 - all),
            weighted_fidelity: weighted,
        })
    }

    /// Branch sums of a weighted graph state by dense simulation.
    pub fn weighted_sums(&self, wg: &WeightedGraph) -> Result<BranchSums> {
        let psi = StateVector::build_weighted(wg, self.cap)?;
        let s = statevector::branch_sums(&psi, &self.pattern, &self.ideal, &|b| self.accepts(b), &[])?;
        Ok(BranchSums {
            acceptance: s.acceptance,
            weighted_fidelity: s.weighted_fidelity,
        })
    }

    pub fn state_sums(&self, state: &PreparedState) -> Result<BranchSums> {
        match state {
            PreparedState::Tableau(t) => self.tableau_sums(t),
            PreparedState::Weighted(wg) => self.weighted_sums(wg),
        }
    }

    /// Branch sums of one realisation; trivial defects reuse the ideal sums.
    pub fn realization_sums(&self, r: &NoiseRealization) -> Result<BranchSums> {
        if r.is_trivial() && !matches!(r, NoiseRealization::SharedPhase(_)) {
            return Ok(self.ideal_sums);
        }
        self.state_sums(&realize_state(&self.graph, r)?)
    }

    pub fn label(&self) -> String {
        self.family.map_or_else(|| "custom".to_string(), |f| f.label())
    }
}

/// One simulated run with sampled outcomes.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub accepted: bool,
    /// Fidelity to the ideal target; zero for rejected runs and for outcomes the ideal
    /// state cannot produce.
    pub fidelity: f64,
    pub outcome: OutcomeRecord,
    /// Probability of the sampled outcome given the realisation.
    pub weight: f64,
}

pub fn run_once<R: Rng + ?Sized>(proto: &ExtractionProtocol, model: &NoiseModel, rng: &mut R) -> Result<RunRecord> {
    let r = sample_realization(&proto.graph, model, rng)?;
    let measured = &proto.ideal.measured;
    match realize_state(&proto.graph, &r)? {
        PreparedState::Tableau(mut t) => {
            let mut signs = Vec::with_capacity(measured.len());
            let mut weight = 1.0;
            for (q, basis) in proto.pattern.steps() {
                let m = t.measure(q, basis, None, rng)?;
                weight *= m.probability;
                signs.push((q, m.sign));
            }
            let outcome = OutcomeRecord::new(signs)?;
            let bits = outcome.to_bits(measured)?;
            let accepted = proto.accepts(&bits);
            let fidelity = match proto.target_for(&bits) {
                Some(target) if accepted => stab_fidelity(&t.reduce(&proto.pattern.steps())?, &target)?,
                _ => 0.0,
            };
            Ok(RunRecord {
                accepted,
                fidelity,
                outcome,
                weight,
            })
        }
        PreparedState::Weighted(wg) => {
            let psi = StateVector::build_weighted(&wg, proto.cap)?;
            let mut steps = proto.pattern.steps();
            steps.sort_unstable_by_key(|s| s.0);
            let branches = psi.branch_states(&steps)?;
            let probs: Vec<f64> = branches.iter().map(StateVector::norm_sqr).collect();
            let total: f64 = probs.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut code = probs.len() - 1;
            for (i, &p) in probs.iter().enumerate() {
                if u < p {
                    code = i;
                    break;
                }
                u -= p;
            }
            let bits = BitVec::from_bools(&(0..steps.len()).map(|k| (code >> k) & 1 == 1).collect::<Vec<_>>());
            let outcome = OutcomeRecord::from_bits(measured, &bits);
            let accepted = proto.accepts(&bits);
            let fidelity = match proto.target_for(&bits) {
                Some(target) if accepted => branches[code].fidelity_to_tableau(&target)?.min(1.0),
                _ => 0.0,
            };
            Ok(RunRecord {
                accepted,
                fidelity,
                outcome,
                weight: probs[code] / total,
            })
        }
    }
}

/// Point estimate of the postselected mean fidelity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Estimate {
    Value { mean_fidelity: f64, stderr: f64 },
    /// No realisation had a nonzero acceptance probability.
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub samples: u64,
    /// Realisations with nonzero acceptance probability.
    pub accepted: u64,
    /// Mean acceptance probability.
    pub acceptance_rate: f64,
    pub estimate: Estimate,
}

impl ExperimentResult {
    pub fn mean_fidelity(&self) -> Option<f64> {
        match self.estimate {
            Estimate::Value { mean_fidelity, .. } => Some(mean_fidelity),
            Estimate::Empty => None,
        }
    }

    pub fn stderr(&self) -> Option<f64> {
        match self.estimate {
            Estimate::Value { stderr, .. } => Some(stderr),
            Estimate::Empty => None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.estimate == Estimate::Empty
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: u64,
    accepted: u64,
    a: f64,
    b: f64,
    aa: f64,
    ab: f64,
    bb: f64,
}

impl Moments {
    fn push(&mut self, s: BranchSums) {
        let (a, b) = (s.weighted_fidelity, s.acceptance);
        self.n += 1;
        self.accepted += u64::from(b > 0.0);
        self.a += a;
        self.b += b;
        self.aa += a * a;
        self.ab += a * b;
        self.bb += b * b;
    }

    fn merge(self, o: Moments) -> Moments {
        Moments {
            n: self.n + o.n,
            accepted: self.accepted + o.accepted,
            a: self.a + o.a,
            b: self.b + o.b,
            aa: self.aa + o.aa,
            ab: self.ab + o.ab,
            bb: self.bb + o.bb,
        }
    }

    fn pairwise(parts: &[Moments]) -> Moments {
        match parts.len() {
            0 => Moments::default(),
            1 => parts[0],
            len => {
                let (l, r) = parts.split_at(len / 2);
                Self::pairwise(l).merge(Self::pairwise(r))
            }
        }
    }

    /// Ratio estimator `ΣA / ΣB` with its delta-method standard error.
    fn finish(&self) -> ExperimentResult {
        let n = self.n as f64;
        let estimate = if self.b > 0.0 {
            let ratio = self.a / self.b;
            let stderr = if self.n > 1 {
                let ss = (self.aa - 2.0 * ratio * self.ab + ratio * ratio * self.bb).max(0.0);
                (ss / (n * (n - 1.0))).sqrt() / (self.b / n)
            } else {
                0.0
            };
            Estimate::Value {
                mean_fidelity: ratio.clamp(0.0, 1.0),
                stderr,
            }
        } else {
            Estimate::Empty
        };
        ExperimentResult {
            samples: self.n,
            accepted: self.accepted,
            acceptance_rate: if self.n > 0 { self.b / n } else { 0.0 },
            estimate,
        }
    }
}

/// Random stream of sample `index` under the master seed.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Monte Carlo over realisations with exact outcome-branch sums per realisation.
/// Identical for any thread count.
pub fn mean_fidelity(
    proto: &ExtractionProtocol,
    model: &NoiseModel,
    n_samples: u64,
    seed: u64,
) -> Result<ExperimentResult> {
    if n_samples == 0 {
        return Err(Error::Domain("n_samples must be at least 1".into()));
    }
    model.validate()?;
    let chunks = n_samples.div_ceil(CHUNK);
    let parts = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n_samples) {
                let mut rng = sample_rng(seed, i);
                let r = sample_realization(&proto.graph, model, &mut rng)?;
                m.push(proto.realization_sums(&r)?);
            }
            Ok(m)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Moments::pairwise(&parts).finish())
}

/// `mean_fidelity` at each native parameter value of the grid, all with the same seed.
pub fn fidelity_curve(
    proto: &ExtractionProtocol,
    kind: NoiseKind,
    grid: &[f64],
    n_samples: u64,
    seed: u64,
) -> Result<Vec<(f64, ExperimentResult)>> {
    let models = grid
        .iter()
        .map(|&x| kind.with_parameter(x))
        .collect::<Result<Vec<_>>>()?;
    grid.iter()
        .zip(&models)
        .map(|(&x, m)| Ok((x, mean_fidelity(proto, m, n_samples, seed)?)))
        .collect()
}

/// Acceptance-weighted averages over the correlated phase, by quadrature or at a
/// fixed offset.
pub fn phase_average(proto: &ExtractionProtocol, dist: &PhaseDistribution) -> Result<BranchSums> {
    let avg = statevector::gaussian_phase_average(
        &proto.graph,
        dist,
        &proto.pattern,
        &|b| proto.accepts(b),
        &[],
        proto.cap,
    )?;
    Ok(BranchSums {
        acceptance: avg.acceptance,
        weighted_fidelity: avg.weighted_fidelity,
    })
}

/// Branch sums aggregated by defect count.
#[derive(Debug, Clone, PartialEq)]
pub struct DefectProfile {
    /// Number of independent defect sites (edges or qubits).
    pub sites: usize,
    /// `Σ B` over configurations with `k` defects, for `k = 0..=max_order`.
    pub acceptance: Vec<f64>,
    /// `Σ A` over configurations with `k` defects.
    pub weighted_fidelity: Vec<f64>,
}

impl DefectProfile {
    pub fn max_order(&self) -> usize {
        self.acceptance.len() - 1
    }

    pub fn is_complete(&self) -> bool {
        self.max_order() == self.sites
    }

    /// Exact mean fidelity at defect probability `p`; needs the complete profile unless `p = 0`.
    pub fn mean_fidelity(&self, p: f64) -> Result<Option<f64>> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("probability {p} not in [0, 1]")));
        }
        if p > 0.0 && !self.is_complete() {
            return Err(Error::Precondition("the defect profile is truncated".into()));
        }
        let (mut a, mut b) = (0.0, 0.0);
        for k in 0..=self.max_order() {
            let w = p.powi(k as i32) * (1.0 - p).powi((self.sites - k) as i32);
            a += w * self.weighted_fidelity[k];
            b += w * self.acceptance[k];
        }
        Ok((b > 0.0).then(|| (a / b).clamp(0.0, 1.0)))
    }

    /// `−d⟨F⟩/dp` at zero: `(B₁ − A₁) / B₀`.
    pub fn first_order_alpha(&self) -> Option<f64> {
        (self.max_order() >= 1 && self.acceptance[0] > 0.0)
            .then(|| (self.acceptance[1] - self.weighted_fidelity[1]) / self.acceptance[0])
    }
}

fn defect_sites(proto: &ExtractionProtocol, kind: NoiseKind) -> Result<usize> {
    match kind {
        NoiseKind::EdgeLoss => Ok(proto.graph.edge_count()),
        NoiseKind::ZFlip => Ok(proto.graph.num_vertices()),
        NoiseKind::CorrelatedPhase => Err(Error::Unsupported(
            "defect enumeration needs a discrete noise model; use the phase quadrature".into(),
        )),
    }
}

fn defect(proto: &ExtractionProtocol, kind: NoiseKind, sites: &[usize]) -> NoiseRealization {
    match kind {
        NoiseKind::EdgeLoss => {
            let edges = proto.graph.edges();
            NoiseRealization::LostEdges(sites.iter().map(|&i| edges[i]).collect())
        }
        _ => NoiseRealization::FlippedQubits(sites.iter().copied().collect()),
    }
}

/// Branch sums of every configuration with exactly one defect, in site order.
pub fn single_defect_sums(proto: &ExtractionProtocol, kind: NoiseKind) -> Result<Vec<(NoiseRealization, BranchSums)>> {
    let sites = defect_sites(proto, kind)?;
    (0..sites)
        .into_par_iter()
        .map(|s| {
            let r = defect(proto, kind, &[s]);
            let sums = proto.realization_sums(&r)?;
            Ok((r, sums))
        })
        .collect()
}

/// Exact branch sums of every configuration with at most `max_order` defects.
pub fn defect_profile(proto: &ExtractionProtocol, kind: NoiseKind, max_order: usize) -> Result<DefectProfile> {
    let sites = defect_sites(proto, kind)?;
    let max_order = max_order.min(sites);
    let mut configs = 0usize;
    let mut binom = 1usize;
    for k in 0..=max_order {
        configs = configs.saturating_add(binom);
        binom = binom.saturating_mul(sites - k) / (k + 1);
    }
    if configs > MAX_DEFECT_CONFIGS {
        return Err(Error::Unsupported(format!(
            "{configs} defect configurations exceed the enumeration limit of {MAX_DEFECT_CONFIGS}"
        )));
    }
    let mut profile = DefectProfile {
        sites,
        acceptance: vec![0.0; max_order + 1],
        weighted_fidelity: vec![0.0; max_order + 1],
    };
    for k in 0..=max_order {
        let combos: Vec<Vec<usize>> = (0..sites).combinations(k).collect();
        let sums = combos
            .par_iter()
            .map(|c| proto.realization_sums(&defect(proto, kind, c)))
            .collect::<Result<Vec<_>>>()?;
        for s in sums {
            profile.acceptance[k] += s.acceptance;
            profile.weighted_fidelity[k] += s.weighted_fidelity;
        }
    }
    Ok(profile)
}

/// Deterministic mean fidelity: full defect enumeration for the discrete models, 41-node
/// quadrature for the correlated one. `None` when nothing is accepted.
pub fn exact_mean_fidelity(proto: &ExtractionProtocol, model: &NoiseModel) -> Result<Option<f64>> {
    model.validate()?;
    match *model {
        NoiseModel::CorrelatedPhase { sigma } => {
            Ok(phase_average(proto, &PhaseDistribution::gaussian(sigma))?.fidelity().map(|f| f.min(1.0)))
        }
        _ => {
            let kind = model.kind();
            let profile = defect_profile(proto, kind, defect_sites(proto, kind)?)?;
            profile.mean_fidelity(model.probability())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SusceptibilityMethod {
    /// `(1 − ⟨F⟩(p*)) / p*` from Monte Carlo.
    DiscreteDerivative,
    /// Exact single-defect expansion.
    FirstOrderExact,
    /// `2α(p*/2) − α(p*)` from deterministic fidelities.
    Extrapolated,
}

impl SusceptibilityMethod {
    pub fn name(self) -> &'static str {
        match self {
            SusceptibilityMethod::DiscreteDerivative => "discrete_derivative",
            SusceptibilityMethod::FirstOrderExact => "first_order_exact",
            SusceptibilityMethod::Extrapolated => "extrapolated",
        }
    }
}

impl fmt::Display for SusceptibilityMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SusceptibilityResult {
    pub alpha: f64,
    /// Edge-equivalent probability used; zero for the exact expansion.
    pub p_star: f64,
    pub method: SusceptibilityMethod,
    pub stderr: f64,
}

fn check_p_star(p_star: f64) -> Result<()> {
    if !(p_star > 0.0 && p_star <= 0.1) {
        return Err(Error::Domain(format!("p* = {p_star} not in (0, 0.1]")));
    }
    Ok(())
}

/// Discrete-derivative estimate at `p_star` (mapped to `σ` for the correlated model).
pub fn susceptibility(
    proto: &ExtractionProtocol,
    kind: NoiseKind,
    p_star: f64,
    n_samples: u64,
    seed: u64,
) -> Result<SusceptibilityResult> {
    check_p_star(p_star)?;
    let model = kind.with_probability(p_star)?;
    let r = mean_fidelity(proto, &model, n_samples, seed)?;
    let (Some(f), Some(se)) = (r.mean_fidelity(), r.stderr()) else {
        return Err(Error::EmptyEstimate);
    };
    Ok(SusceptibilityResult {
        alpha: (1.0 - f) / p_star,
        p_star,
        method: SusceptibilityMethod::DiscreteDerivative,
        stderr: se / p_star,
    })
}

/// Exact `−d⟨F⟩/dp` at zero from single-defect configurations.
pub fn susceptibility_first_order(proto: &ExtractionProtocol, kind: NoiseKind) -> Result<SusceptibilityResult> {
    let b0 = proto.ideal_acceptance();
    if b0 == 0.0 {
        return Err(Error::EmptyEstimate);
    }
    let (mut b1, mut a1) = (0.0, 0.0);
    for (_, s) in single_defect_sums(proto, kind)? {
        b1 += s.acceptance;
        a1 += s.weighted_fidelity;
    }
    Ok(SusceptibilityResult {
        alpha: (b1 - a1) / b0,
        p_star: 0.0,
        method: SusceptibilityMethod::FirstOrderExact,
        stderr: 0.0,
    })
}

/// Richardson-extrapolated derivative from deterministic fidelities at `p*` and `p*/2`;
/// removes the term linear in `p*` from the discrete derivative.
pub fn susceptibility_extrapolated(
    proto: &ExtractionProtocol,
    kind: NoiseKind,
    p_star: f64,
) -> Result<SusceptibilityResult> {
    check_p_star(p_star)?;
    let deficit = |p: f64| -> Result<f64> {
        let f = exact_mean_fidelity(proto, &kind.with_probability(p)?)?.ok_or(Error::EmptyEstimate)?;
        Ok((1.0 - f) / p)
    };
    Ok(SusceptibilityResult {
        alpha: 2.0 * deficit(p_star / 2.0)? - deficit(p_star)?,
        p_star,
        method: SusceptibilityMethod::Extrapolated,
        stderr: 0.0,
    })
}

/// Header line of the results file format.
pub const RESULTS_HEADER: &str = "# gsx-results v1";

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub family: String,
    pub n: usize,
    pub model: String,
    /// Native noise parameter (`p` or `σ`).
    pub param: f64,
    /// Edge-equivalent probability.
    pub p: f64,
    pub samples: u64,
    pub accepted: u64,
    pub mean_fidelity: Option<f64>,
    pub stderr: Option<f64>,
    pub alpha: Option<f64>,
    pub method: String,
    pub seed: Option<u64>,
    pub postselect: String,
}

impl ResultRow {
    fn base(proto: &ExtractionProtocol, model: &NoiseModel) -> Self {
        ResultRow {
            family: proto.label(),
            n: proto.family.map_or(0, |f| f.n),
            model: model.kind().name().to_string(),
            param: model.parameter(),
            p: model.probability(),
            samples: 0,
            accepted: 0,
            mean_fidelity: None,
            stderr: None,
            alpha: None,
            method: String::new(),
            seed: None,
            postselect: proto.postselect.name().to_string(),
        }
    }

    pub fn from_experiment(proto: &ExtractionProtocol, model: &NoiseModel, r: &ExperimentResult, seed: u64) -> Self {
        ResultRow {
            samples: r.samples,
            accepted: r.accepted,
            mean_fidelity: r.mean_fidelity(),
            stderr: r.stderr(),
            method: "monte_carlo".into(),
            seed: Some(seed),
            ..Self::base(proto, model)
        }
    }

    /// Row for a deterministic fidelity (defect enumeration or quadrature).
    pub fn from_exact(proto: &ExtractionProtocol, model: &NoiseModel, fidelity: Option<f64>) -> Self {
        ResultRow {
            mean_fidelity: fidelity,
            stderr: fidelity.map(|_| 0.0),
            method: "exact".into(),
            ..Self::base(proto, model)
        }
    }

    pub fn from_susceptibility(
        proto: &ExtractionProtocol,
        kind: NoiseKind,
        s: &SusceptibilityResult,
        samples: u64,
        seed: Option<u64>,
    ) -> Result<Self> {
        let model = if s.p_star > 0.0 {
            kind.with_probability(s.p_star)?
        } else {
            kind.with_parameter(0.0)?
        };
        Ok(ResultRow {
            samples,
            stderr: Some(s.stderr),
            alpha: Some(s.alpha),
            method: s.method.name().into(),
            seed,
            ..Self::base(proto, &model)
        })
    }
}

fn io_error(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

/// CSV with the versioned header comment.
pub fn write_csv<W: Write>(rows: &[ResultRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{RESULTS_HEADER}")?;
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record([
            "family",
            "n",
            "model",
            "param",
            "p",
            "samples",
            "accepted",
            "mean_fidelity",
            "stderr",
            "alpha",
            "method",
            "seed",
            "postselect",
        ])
        .map_err(io_error)?;
    }
    for r in rows {
        out.serialize(r).map_err(io_error)?;
    }
    out.flush()
}

/// Reads a table written by [`write_csv`].
pub fn read_csv<R: std::io::Read>(mut r: R) -> Result<Vec<ResultRow>> {
    let mut text = String::new();
    r.read_to_string(&mut text).map_err(|e| Error::Parse(e.to_string()))?;
    let body = text
        .strip_prefix(RESULTS_HEADER)
        .ok_or_else(|| Error::Parse(format!("missing `{RESULTS_HEADER}` header")))?;
    csv::Reader::from_reader(body.trim_start_matches(['\r', '\n']).as_bytes())
        .deserialize()
        .map(|row| row.map_err(|e| Error::Parse(e.to_string())))
        .collect()
}

pub fn results_json(rows: &[ResultRow]) -> serde_json::Value {
    serde_json::json!({
        "schema": RESULTS_HEADER.trim_start_matches("# "),
        "rows": rows,
    })
}
