use std::fmt;

/// Errors surfaced by the library. Infeasibility outcomes that callers are
/// expected to branch on (empty sets, infeasible targets) are variants here
/// rather than panics; programming errors (dimension mismatches caught late)
/// also report through this type so the CLI can map them to exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A constructed polytope has no feasible point.
    EmptyPolytope,
    /// An LP was proven infeasible.
    Infeasible,
    /// An LP was proven unbounded along the objective.
    Unbounded,
    /// Iteration or conditioning limits exceeded inside a numerical kernel.
    NumericalFailure(&'static str),
    /// Dykstra residual stalled above tolerance; the affine-box intersection
    /// is empty (caller violated the membership precondition).
    EmptyIntersection,
    /// Aggregate target lies outside the aggregate feasible set; the payload
    /// is the index of a violated facet direction.
    InfeasibleTarget(usize),
    /// Subgradient loop hit max_iters before the termination test fired.
    MaxItersExceeded,
    /// Zonotope operands do not share a generator family or horizon.
    FamilyMismatch,
    /// Aggregate update bookkeeping drove a generator bound negative.
    NegativeBeta(usize),
    /// A beta vector violates its |beta| <= betabar box.
    BetaOutOfRange(usize),
    /// Per-generator cost slopes are not non-decreasing.
    NonConvexInput(usize),
    /// Operand dimensions do not agree.
    DimensionMismatch(&'static str),
    /// eta-scaled reservation left a negative remainder bound.
    EmptyRemainder(usize),
    /// Malformed input file; payload is the 1-based line number.
    ParseError(usize, String),
    /// Price series length incompatible with the scenario horizon.
    LengthMismatch { expected: usize, got: usize },
    /// Invalid parameter combination supplied by the caller.
    InvalidParams(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyPolytope => write!(f, "polytope is empty"),
            Error::Infeasible => write!(f, "linear program is infeasible"),
            Error::Unbounded => write!(f, "linear program is unbounded"),
            Error::NumericalFailure(what) => write!(f, "numerical failure: {what}"),
            Error::EmptyIntersection => {
                write!(f, "affine-box intersection is empty or projection stalled")
            }
            Error::InfeasibleTarget(i) => {
                write!(f, "aggregate target violates facet direction {i}")
            }
            Error::MaxItersExceeded => write!(f, "subgradient iteration cap reached"),
            Error::FamilyMismatch => write!(f, "zonotope families or horizons differ"),
            Error::NegativeBeta(i) => write!(f, "aggregate bound would go negative at generator {i}"),
            Error::BetaOutOfRange(i) => write!(f, "beta exceeds bound at generator {i}"),
            Error::NonConvexInput(i) => write!(f, "slopes not non-decreasing in component {i}"),
            Error::DimensionMismatch(what) => write!(f, "dimension mismatch: {what}"),
            Error::EmptyRemainder(i) => write!(f, "negative remainder bound at generator {i}"),
            Error::ParseError(line, msg) => write!(f, "parse error at line {line}: {msg}"),
            Error::LengthMismatch { expected, got } => {
                write!(f, "length mismatch: expected {expected}, got {got}")
            }
            Error::InvalidParams(msg) => write!(f, "invalid parameters: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
