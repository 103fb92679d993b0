//! Noise channels, their parameter maps, and per-run sampling of defects.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, WeightedGraph};
use crate::stabilizer::StabilizerTableau;

/// A noise channel acting on graph-state preparation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", deny_unknown_fields)]
pub enum NoiseModel {
    /// Every edge independently missing with probability `p`.
    #[serde(rename = "edge_loss")]
    UncorrelatedEdge { p: f64 },
    /// Every controlled phase equal to `π + ε`, one `ε ~ N(0, σ²)` per run.
    #[serde(rename = "correlated_phase")]
    CorrelatedPhase { sigma: f64 },
    /// Every qubit independently hit by `Z` with probability `p`.
    #[serde(rename = "z_flip")]
    LocalZFlip { p: f64 },
}

/// Discriminant of [`NoiseModel`] without its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    EdgeLoss,
    CorrelatedPhase,
    ZFlip,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::EdgeLoss => "edge_loss",
            NoiseKind::CorrelatedPhase => "correlated_phase",
            NoiseKind::ZFlip => "z_flip",
        }
    }

    /// Name of the native parameter.
    pub fn parameter(self) -> &'static str {
        match self {
            NoiseKind::CorrelatedPhase => "sigma",
            _ => "p",
        }
    }

    /// Model with native parameter `value`.
    pub fn with_parameter(self, value: f64) -> Result<NoiseModel> {
        let m = match self {
            NoiseKind::EdgeLoss => NoiseModel::UncorrelatedEdge { p: value },
            NoiseKind::CorrelatedPhase => NoiseModel::CorrelatedPhase { sigma: value },
            NoiseKind::ZFlip => NoiseModel::LocalZFlip { p: value },
        };
        m.validate()?;
        Ok(m)
    }

    /// Model whose effective edge-equivalent probability is `p`.
    pub fn with_probability(self, p: f64) -> Result<NoiseModel> {
        match self {
            NoiseKind::CorrelatedPhase => self.with_parameter(sigma_from_p(p)?),
            _ => self.with_parameter(p),
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge_loss" | "edge" => Ok(NoiseKind::EdgeLoss),
            "correlated_phase" | "correlated" => Ok(NoiseKind::CorrelatedPhase),
            "z_flip" | "zflip" => Ok(NoiseKind::ZFlip),
            _ => Err(Error::Parse(format!("unknown noise model `{s}`"))),
        }
    }
}

impl NoiseModel {
    pub fn kind(&self) -> NoiseKind {
        match self {
            NoiseModel::UncorrelatedEdge { .. } => NoiseKind::EdgeLoss,
            NoiseModel::CorrelatedPhase { .. } => NoiseKind::CorrelatedPhase,
            NoiseModel::LocalZFlip { .. } => NoiseKind::ZFlip,
        }
    }

    /// Native parameter: `p`, or `σ` for the correlated model.
    pub fn parameter(&self) -> f64 {
        match *self {
            NoiseModel::UncorrelatedEdge { p } | NoiseModel::LocalZFlip { p } => p,
            NoiseModel::CorrelatedPhase { sigma } => sigma,
        }
    }

    /// Edge-equivalent probability; `p_from_sigma(σ)` for the correlated model.
    pub fn probability(&self) -> f64 {
        match *self {
            NoiseModel::UncorrelatedEdge { p } | NoiseModel::LocalZFlip { p } => p,
            NoiseModel::CorrelatedPhase { sigma } => p_from_sigma(sigma),
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.parameter() == 0.0
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseModel::UncorrelatedEdge { p } | NoiseModel::LocalZFlip { p } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::Domain(format!("probability {p} not in [0, 1]")));
                }
            }
            NoiseModel::CorrelatedPhase { sigma } => {
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::Domain(format!("phase standard deviation {sigma} must be finite and >= 0")));
                }
            }
        }
        Ok(())
    }
}

/// Defect of a single run.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseRealization {
    LostEdges(BTreeSet<(usize, usize)>),
    SharedPhase(f64),
    FlippedQubits(BTreeSet<usize>),
}

impl NoiseRealization {
    pub fn is_trivial(&self) -> bool {
        match self {
            NoiseRealization::LostEdges(e) => e.is_empty(),
            NoiseRealization::SharedPhase(eps) => *eps == 0.0,
            NoiseRealization::FlippedQubits(q) => q.is_empty(),
        }
    }
}

/// State prepared for one run.
#[derive(Debug, Clone)]
pub enum PreparedState {
    Tableau(StabilizerTableau),
    Weighted(WeightedGraph),
}

/// `(1 − e^{−σ²/2}) / 2`.
pub fn p_from_sigma(sigma: f64) -> f64 {
    -0.5 * (-sigma * sigma / 2.0).exp_m1()
}

/// Inverse of [`p_from_sigma`] on `[0, ½)`.
pub fn sigma_from_p(p: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&p) {
        return Err(Error::Domain(format!("probability {p} not in [0, 0.5)")));
    }
    Ok((-2.0 * (-2.0 * p).ln_1p()).sqrt())
}

pub fn sample_realization<R: Rng + ?Sized>(g: &Graph, m: &NoiseModel, rng: &mut R) -> Result<NoiseRealization> {
    m.validate()?;
    Ok(match *m {
        NoiseModel::UncorrelatedEdge { p } => {
            NoiseRealization::LostEdges(g.edges().into_iter().filter(|_| rng.random_bool(p)).collect())
        }
        NoiseModel::CorrelatedPhase { sigma } => {
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
            NoiseRealization::SharedPhase(normal.sample(rng))
        }
        NoiseModel::LocalZFlip { p } => {
            NoiseRealization::FlippedQubits((0..g.num_vertices()).filter(|_| rng.random_bool(p)).collect())
        }
    })
}

pub fn realize_state(g: &Graph, r: &NoiseRealization) -> Result<PreparedState> {
    match r {
        NoiseRealization::LostEdges(lost) => {
            let mut sub = g.clone();
            for &(a, b) in lost {
                if !g.has_edge(a, b) {
                    return Err(Error::Precondition(format!("lost edge ({a}, {b}) is not in the graph")));
                }
                sub.remove_edge(a, b);
            }
            Ok(PreparedState::Tableau(StabilizerTableau::from_graph(&sub)))
        }
        NoiseRealization::FlippedQubits(flipped) => {
            let mut t = StabilizerTableau::from_graph(g);
            for &q in flipped {
                t.apply_local_z(q)?;
            }
            Ok(PreparedState::Tableau(t))
        }
        NoiseRealization::SharedPhase(eps) => Ok(PreparedState::Weighted(WeightedGraph::uniform(g.clone(), PI + eps))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_family, FamilyKind, FamilySpec};
    use crate::statevector::{StateVector, DEFAULT_CAP};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn crazy2() -> Graph {
        build_family(&FamilySpec::new(FamilyKind::Crazy, 2)).unwrap()
    }

    #[test]
    fn sigma_map_examples() {
        assert_eq!(p_from_sigma(0.0), 0.0);
        assert!((p_from_sigma(1e3) - 0.5).abs() < 1e-15);
        assert!((p_from_sigma(0.2) - 0.0099).abs() < 1e-5);
        assert_eq!(sigma_from_p(0.0).unwrap(), 0.0);
        assert!((p_from_sigma(sigma_from_p(0.01).unwrap()) - 0.01).abs() < 1e-12);
        let s = sigma_from_p(0.25).unwrap();
        assert!((s * s - 2.0 * 2f64.ln()).abs() < 1e-12);
        assert!(sigma_from_p(0.5).is_err());
        assert!(sigma_from_p(-0.1).is_err());
    }

    #[test]
    fn series_of_sigma_map() {
        for k in 1..=30 {
            let s = k as f64 * 0.01;
            let series = s * s / 4.0 - s.powi(4) / 16.0;
            assert!((p_from_sigma(s) - series).abs() <= s.powi(6));
        }
    }

    #[test]
    fn zero_noise_realizations_are_ideal() {
        let g = crazy2();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ideal = StabilizerTableau::from_graph(&g);
        for m in [
            NoiseModel::UncorrelatedEdge { p: 0.0 },
            NoiseModel::LocalZFlip { p: 0.0 },
            NoiseModel::CorrelatedPhase { sigma: 0.0 },
        ] {
            let r = sample_realization(&g, &m, &mut rng).unwrap();
            assert!(r.is_trivial());
            match realize_state(&g, &r).unwrap() {
                PreparedState::Tableau(t) => assert!(t.same_state(&ideal)),
                PreparedState::Weighted(wg) => {
                    let s = StateVector::build_weighted(&wg, DEFAULT_CAP).unwrap();
                    assert!((s.fidelity_to_tableau(&ideal).unwrap() - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn full_flip_hits_every_qubit() {
        let g = crazy2();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = sample_realization(&g, &NoiseModel::LocalZFlip { p: 1.0 }, &mut rng).unwrap();
        assert_eq!(r, NoiseRealization::FlippedQubits((0..6).collect()));
    }

    #[test]
    fn lost_edge_on_path() {
        let g = build_family(&FamilySpec::new(FamilyKind::Path, 2)).unwrap();
        let r = NoiseRealization::LostEdges([(1, 2)].into());
        let PreparedState::Tableau(t) = realize_state(&g, &r).unwrap() else {
            panic!("expected a tableau");
        };
        assert_eq!(t.dump(), "+XZII\n+ZXII\n+IIXZ\n+IIZX\n");
        let bad = NoiseRealization::LostEdges([(0, 3)].into());
        assert!(realize_state(&g, &bad).is_err());
    }

    #[test]
    fn flips_commute_with_construction() {
        let g = crazy2();
        let flipped: BTreeSet<usize> = [1, 4].into();
        let PreparedState::Tableau(t) = realize_state(&g, &NoiseRealization::FlippedQubits(flipped.clone())).unwrap()
        else {
            panic!("expected a tableau");
        };
        // Z before the controlled-Z gates, on the statevector.
        let mut psi = StateVector::plus(g.num_vertices()).unwrap();
        for &q in &flipped {
            psi = psi.apply_pauli(&crate::pauli::PauliString::single(6, q, crate::pauli::Pauli::Z).unwrap()).unwrap();
        }
        for (a, b) in g.edges() {
            psi.apply_controlled_phase(a, b, PI).unwrap();
        }
        assert!((psi.fidelity_to_tableau(&t).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_sampler_statistics() {
        let g = crazy2();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = NoiseModel::CorrelatedPhase { sigma: 0.1 };
        let n = 1_000_000;
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let NoiseRealization::SharedPhase(e) = sample_realization(&g, &m, &mut rng).unwrap() else {
                unreachable!()
            };
            s1 += e;
            s2 += e * e;
        }
        let mean = s1 / n as f64;
        let std = (s2 / n as f64 - mean * mean).sqrt();
        assert!(mean.abs() < 3e-4, "{mean}");
        assert!((std - 0.1).abs() < 1e-3, "{std}");
    }

    #[test]
    fn defect_frequencies_pass_chi_square() {
        // Per-element hit counts against Binomial(N, p); 99% critical values of χ² by dof.
        let g = crazy2();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let samples = 100_000;
        for (m, size, crit) in [
            (NoiseModel::UncorrelatedEdge { p: 0.2 }, g.edge_count(), 26.217),
            (NoiseModel::LocalZFlip { p: 0.05 }, g.num_vertices(), 16.812),
        ] {
            let mut counts = vec![0u64; size];
            let edges = g.edges();
            for _ in 0..samples {
                match sample_realization(&g, &m, &mut rng).unwrap() {
                    NoiseRealization::LostEdges(lost) => {
                        for e in lost {
                            counts[edges.iter().position(|&x| x == e).unwrap()] += 1;
                        }
                    }
                    NoiseRealization::FlippedQubits(q) => q.into_iter().for_each(|i| counts[i] += 1),
                    NoiseRealization::SharedPhase(_) => unreachable!(),
                }
            }
            let p = m.probability();
            let expect = samples as f64 * p;
            let var = expect * (1.0 - p);
            let chi2: f64 = counts.iter().map(|&c| (c as f64 - expect).powi(2) / var).sum();
            assert!(chi2 < crit, "{m:?}: chi2 {chi2}");
        }
    }

    #[test]
    fn config_form_round_trips() {
        let m: NoiseModel = serde_json::from_str(r#"{"model": "edge_loss", "p": 0.1}"#).unwrap();
        assert_eq!(m, NoiseModel::UncorrelatedEdge { p: 0.1 });
        let c: NoiseModel = serde_json::from_str(r#"{"model": "correlated_phase", "sigma": 0.2}"#).unwrap();
        assert_eq!(c.probability(), p_from_sigma(0.2));
        assert_eq!(serde_json::to_string(&NoiseModel::LocalZFlip { p: 0.5 }).unwrap(), r#"{"model":"z_flip","p":0.5}"#);
        assert!(serde_json::from_str::<NoiseModel>(r#"{"model": "edge_loss", "sigma": 0.1}"#).is_err());
        assert!(NoiseModel::UncorrelatedEdge { p: 1.5 }.validate().is_err());
        assert!(NoiseModel::CorrelatedPhase { sigma: -0.1 }.validate().is_err());
        let mapped = NoiseKind::CorrelatedPhase.with_probability(0.01).unwrap();
        assert!((mapped.probability() - 0.01).abs() < 1e-12);
        assert_eq!(NoiseKind::EdgeLoss.with_probability(0.01).unwrap(), NoiseModel::UncorrelatedEdge { p: 0.01 });
    }
}
