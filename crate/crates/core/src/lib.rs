//! Stabilizer and statevector simulation of Bell/GHZ extraction from noisy graph states.

pub mod bits;
pub mod error;
pub mod experiment;
pub mod gf2;
pub mod graph;
pub mod noise;
pub mod pauli;
pub mod stabilizer;
pub mod statevector;
pub mod verify;

pub use bits::BitVec;
pub use error::{Error, Result};
pub use experiment::{
    ExperimentResult, ExtractionProtocol, PostSelect, ResultRow, SusceptibilityMethod, SusceptibilityResult,
    TargetKind,
};
pub use graph::{build_family, FamilyKind, FamilySpec, Graph, WeightedGraph};
pub use noise::{NoiseKind, NoiseModel, NoiseRealization};
pub use pauli::{Pauli, PauliString, QubitSubset};
pub use stabilizer::{MeasurementPattern, OutcomeRecord, PatternAnalysis, StabilizerTableau};
pub use statevector::{PhaseDistribution, StateVector};
