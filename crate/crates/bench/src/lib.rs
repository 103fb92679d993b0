//! Shared fixtures for the benchmarks.

use gsx_core::{ExtractionProtocol, FamilyKind, FamilySpec, PostSelect};

/// Crazy template with stabilizer-check postselection.
pub fn crazy(n: usize) -> ExtractionProtocol {
    ExtractionProtocol::new(FamilySpec::new(FamilyKind::Crazy, n), PostSelect::StabilizerChecks)
        .expect("crazy templates are valid")
}

/// Twisted template with uniform-minus postselection.
pub fn twisted(n: usize) -> ExtractionProtocol {
    ExtractionProtocol::new(FamilySpec::new(FamilyKind::TwistedPair, n), PostSelect::AllMinus)
        .expect("odd twisted templates are valid")
}
