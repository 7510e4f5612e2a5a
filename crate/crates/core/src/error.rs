use thiserror::Error;

/// Errors produced by the reconstruction routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("labeled point `{0}` is absent from the frame")]
    MissingLabel(String),

    #[error("label `{0}` appears more than once in a frame")]
    DuplicateLabel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("rigid motion violates its invariants: {0}")]
    InvalidMotion(String),

    #[error("lengths are inconsistent with the projection (closure defect {defect:.3e})")]
    InconsistentLengths { defect: f64 },

    #[error("degenerate elimination (pivot {pivot:.3e}): collinear points or frames identical up to in-plane motion")]
    DegenerateElimination { pivot: f64 },

    #[error("singular linear system (pivot {pivot:.3e} below threshold {threshold:.3e})")]
    SingularSystem { pivot: f64, threshold: f64 },

    #[error("no real solution (discriminant {discriminant:.3e})")]
    NoSolution { discriminant: f64 },

    #[error("degenerate basis: the reference points are (nearly) collinear")]
    DegenerateBasis,

    #[error("degenerate prediction line: both predicted points coincide (distance to the point {point_distance:.3e})")]
    DegenerateLine { point_distance: f64 },

    #[error("frames share a viewing direction; no out-of-plane motion between them")]
    DegenerateMotion,

    #[error("no assignment is consistent with a rigid body (best residual {best:.3e} > threshold {threshold:.3e})")]
    NoConsistentAssignment { best: f64, threshold: f64 },
}

impl Error {
    /// Degenerate configurations, as opposed to malformed input or
    /// measurement inconsistency.
    pub fn is_degenerate(&self) -> bool {
        matches!(
            self,
            Error::DegenerateElimination { .. }
                | Error::SingularSystem { .. }
                | Error::DegenerateBasis
                | Error::DegenerateLine { .. }
                | Error::DegenerateMotion
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
