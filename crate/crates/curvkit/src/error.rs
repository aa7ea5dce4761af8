use thiserror::Error;

/// Errors surfaced by the geometry and calculus layers.
#[derive(Clone, Debug, Error, PartialEq)]
pub enum CurvError {
    /// Adding `+inf` and `-inf`; the caller must report "no bound available".
    #[error("indeterminate sum: +inf + -inf")]
    IndeterminateSum,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// An image-set or marginal query was issued without candidate points.
    #[error("missing candidates for query point")]
    MissingCandidates,

    /// Inner semicompactness / inner calmness* must be declared before
    /// image or marginal rules apply.
    #[error("assumption not declared: {0}")]
    AssumptionNotDeclared(&'static str),

    /// The requested operation is not available for this set atom.
    #[error("unsupported operation: {0}")]
    Unsupported(&'static str),

    /// A cone query was issued at a direction outside the tangent cone.
    #[error("base direction is not tangent")]
    InfeasibleBase,

    /// The queried base point does not belong to the set.
    #[error("base point is not feasible")]
    InfeasibleBasePoint,

    #[error("precondition violated: {0}")]
    PreconditionViolated(&'static str),

    /// The linear system defining the multiplier set is inconsistent.
    #[error("no multiplier solves the stationarity system")]
    NoMultiplier,

    /// Problem-file validation failure, tagged with a JSON pointer.
    #[error("schema error at {pointer}: {message}")]
    SchemaError { pointer: String, message: String },
}

pub type Result<T> = std::result::Result<T, CurvError>;
