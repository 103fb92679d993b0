//! Run configuration: parsing and up-front validation.

use std::fmt;
use std::path::{Path, PathBuf};

use gsx_core::experiment::SusceptibilityMethod;
use gsx_core::{ExtractionProtocol, FamilyKind, FamilySpec, NoiseKind, NoiseModel, PostSelect};
use serde::{Deserialize, Serialize};

/// Largest number of defect sites the exact method will enumerate.
pub const MAX_EXACT_SITES: usize = 22;

/// Invalid configuration or arguments; maps to exit code 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<gsx_core::Error> for ConfigError {
    fn from(e: gsx_core::Error) -> Self {
        ConfigError(e.to_string())
    }
}

type Result<T> = std::result::Result<T, ConfigError>;

fn fail<T>(msg: impl Into<String>) -> Result<T> {
    Err(ConfigError(msg.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMethod {
    #[default]
    MonteCarlo,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    One(f64),
    Many(Vec<f64>),
}

impl Grid {
    fn values(&self) -> Vec<f64> {
        match self {
            Grid::One(v) => vec![*v],
            Grid::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub model: NoiseKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Grid>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub format: Option<Format>,
}

fn default_cap() -> usize {
    gsx_core::statevector::DEFAULT_CAP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Caps {
    #[serde(default = "default_cap")]
    pub statevector_qubits: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            statevector_qubits: default_cap(),
        }
    }
}

fn default_p_star() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SusceptSpec {
    /// Lengths to sweep; each family's own `n` when absent.
    #[serde(default)]
    pub n: Option<Vec<usize>>,
    #[serde(default = "default_p_star")]
    pub p_star: f64,
    #[serde(default)]
    pub method: Option<SusceptibilityMethod>,
}

impl Default for SusceptSpec {
    fn default() -> Self {
        SusceptSpec {
            n: None,
            p_star: default_p_star(),
            method: None,
        }
    }
}

fn default_postselect() -> PostSelect {
    PostSelect::StabilizerChecks
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub families: Vec<FamilySpec>,
    pub noise: NoiseSpec,
    #[serde(default = "default_postselect")]
    pub postselect: PostSelect,
    #[serde(default)]
    pub method: RunMethod,
    #[serde(default)]
    pub n_samples: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub caps: Caps,
    #[serde(default)]
    pub suscept: Option<SusceptSpec>,
}

/// Everything `run` needs, checked.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub protocols: Vec<ExtractionProtocol>,
    pub models: Vec<NoiseModel>,
    pub method: RunMethod,
    pub n_samples: u64,
    pub seed: u64,
}

/// One protocol per swept length, with the method resolved.
#[derive(Debug, Clone)]
pub struct SusceptPlan {
    pub protocols: Vec<ExtractionProtocol>,
    pub kind: NoiseKind,
    pub p_star: f64,
    pub method: SusceptibilityMethod,
    pub n_samples: u64,
    pub seed: u64,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| ConfigError(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
    }

    fn resolve_seed(&self, seed: Option<u64>) -> Result<u64> {
        seed.or(self.seed)
            .map_or_else(|| fail("a seed is required: set `seed` in the config or pass --seed"), Ok)
    }

    fn check_cap(&self) -> Result<()> {
        let cap = self.caps.statevector_qubits;
        if cap == 0 || cap > 30 {
            return fail(format!("caps.statevector_qubits = {cap} not in 1..=30"));
        }
        Ok(())
    }

    fn protocol(&self, family: FamilySpec) -> Result<ExtractionProtocol> {
        let proto = ExtractionProtocol::new(family, self.postselect)?.with_cap(self.caps.statevector_qubits);
        if self.noise.model == NoiseKind::CorrelatedPhase && proto.graph().num_vertices() > proto.cap() {
            return fail(format!(
                "{} n={} has {} qubits, above the statevector cap {}",
                family.label(),
                family.n,
                proto.graph().num_vertices(),
                proto.cap()
            ));
        }
        Ok(proto)
    }

    fn sample_count(&self) -> Result<u64> {
        match self.n_samples {
            Some(0) | None => fail("n_samples must be a positive integer for Monte Carlo estimates"),
            Some(n) => Ok(n),
        }
    }

    /// Noise models for the grid, in config order.
    pub fn models(&self) -> Result<Vec<NoiseModel>> {
        let kind = self.noise.model;
        let (values, native) = match (&self.noise.p, &self.noise.sigma) {
            (Some(_), Some(_)) => return fail("give exactly one of noise.p and noise.sigma"),
            (None, None) => return fail("noise needs a p or sigma value (scalar or list)"),
            (Some(p), None) => (p.values(), false),
            (None, Some(s)) => {
                if kind != NoiseKind::CorrelatedPhase {
                    return fail(format!("noise.sigma applies only to correlated_phase, not {}", kind.name()));
                }
                (s.values(), true)
            }
        };
        if values.is_empty() {
            return fail("the noise grid is empty");
        }
        values
            .into_iter()
            .map(|v| {
                let m = if native { kind.with_parameter(v) } else { kind.with_probability(v) };
                m.map_err(|e| ConfigError(format!("noise grid value {v}: {e}")))
            })
            .collect()
    }

    pub fn run_plan(&self, seed: Option<u64>) -> Result<RunPlan> {
        self.check_cap()?;
        if self.families.is_empty() {
            return fail("families must list at least one template");
        }
        let models = self.models()?;
        let protocols = self.families.iter().map(|&f| self.protocol(f)).collect::<Result<Vec<_>>>()?;
        let n_samples = match self.method {
            RunMethod::MonteCarlo => self.sample_count()?,
            RunMethod::Exact => {
                for p in &protocols {
                    let sites = match self.noise.model {
                        NoiseKind::EdgeLoss => p.graph().edge_count(),
                        NoiseKind::ZFlip => p.graph().num_vertices(),
                        NoiseKind::CorrelatedPhase => 0,
                    };
                    if sites > MAX_EXACT_SITES {
                        return fail(format!(
                            "exact method: {} has {sites} defect sites, above the limit {MAX_EXACT_SITES}",
                            p.label()
                        ));
                    }
                }
                0
            }
        };
        Ok(RunPlan {
            protocols,
            models,
            method: self.method,
            n_samples,
            seed: self.resolve_seed(seed)?,
        })
    }

    pub fn suscept_plan(&self, seed: Option<u64>) -> Result<SusceptPlan> {
        self.check_cap()?;
        if self.families.is_empty() {
            return fail("families must list at least one template");
        }
        let spec = self.suscept.clone().unwrap_or_default();
        let kind = self.noise.model;
        if !(spec.p_star > 0.0 && spec.p_star <= 0.1) {
            return fail(format!("suscept.p_star = {} not in (0, 0.1]", spec.p_star));
        }
        let method = spec.method.unwrap_or(match kind {
            NoiseKind::CorrelatedPhase => SusceptibilityMethod::Extrapolated,
            _ => SusceptibilityMethod::FirstOrderExact,
        });
        if method == SusceptibilityMethod::FirstOrderExact && kind == NoiseKind::CorrelatedPhase {
            return fail("first_order_exact needs a discrete noise model; use extrapolated for correlated_phase");
        }
        let mut protocols = Vec::new();
        for &family in &self.families {
            let lengths = spec.n.clone().unwrap_or_else(|| vec![family.n]);
            if lengths.is_empty() {
                return fail("suscept.n is empty");
            }
            for n in lengths {
                let proto = self.protocol(FamilySpec { n, ..family })?;
                if method == SusceptibilityMethod::Extrapolated && kind != NoiseKind::CorrelatedPhase {
                    let sites = match kind {
                        NoiseKind::EdgeLoss => proto.graph().edge_count(),
                        _ => proto.graph().num_vertices(),
                    };
                    if sites > MAX_EXACT_SITES {
                        return fail(format!(
                            "extrapolated method: {} n={n} has {sites} defect sites, above {MAX_EXACT_SITES}",
                            family.label()
                        ));
                    }
                }
                protocols.push(proto);
            }
        }
        let n_samples = match method {
            SusceptibilityMethod::DiscreteDerivative => self.sample_count()?,
            _ => 0,
        };
        Ok(SusceptPlan {
            protocols,
            kind,
            p_star: spec.p_star,
            method,
            n_samples,
            seed: self.resolve_seed(seed)?,
        })
    }
}

/// Family spec from command-line pieces, validated.
pub fn family_from_args(kind: &str, n: usize, arms: Option<usize>) -> Result<FamilySpec> {
    let kind: FamilyKind = kind.parse()?;
    let spec = match arms {
        Some(a) => FamilySpec::star(kind, n, a),
        None => FamilySpec::new(kind, n),
    };
    spec.validate()?;
    Ok(spec)
}
