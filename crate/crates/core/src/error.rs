//! Crate-wide error type.
//!
//! Validation errors name the offending input in the same 1-based
//! convention the interfaces use, so they can be surfaced to a user
//! unchanged. Solver errors that interrupt an iteration carry the
//! best iterate found so far.

use crate::norm::NormResult;
use crate::solver::FitResult;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A covariate belongs to no group, so the penalty would be infinite
    /// for any vector with mass on it. Index is 1-based.
    #[error("covariate {0} is not covered by any group")]
    UncoveredCovariate(usize),

    /// Group weights must be strictly positive. Index is the 1-based
    /// position of the group in the input list.
    #[error("group {group} has non-positive weight {weight}")]
    NonpositiveWeight { group: usize, weight: f64 },

    /// The same index set appears twice in the group list (1-based positions).
    #[error("group {second} duplicates group {first}")]
    DuplicateGroup { first: usize, second: usize },

    #[error("group {0} is empty")]
    EmptyGroup(usize),

    /// A covariate index outside 1..=p.
    #[error("covariate index {index} is out of range for p = {p}")]
    IndexOutOfRange { index: usize, p: usize },

    #[error("edge ({u}, {v}) is not a valid pair of distinct vertices")]
    InvalidEdge { u: usize, v: usize },

    /// The candidate cover does not actually cover the group under test.
    #[error("candidate set does not cover the group")]
    CoverViolation,

    /// The domination program has no feasible point.
    #[error("domination program is infeasible for the given weights")]
    Infeasible,

    /// A decomposition was requested from a coverage vector that leaves
    /// mass on some covariate uncovered. Index is 1-based.
    #[error("coverage is zero at covariate {0} where w is nonzero")]
    UncoveredMass(usize),

    /// A closed-form oracle was asked about a group set it does not describe.
    #[error("group set does not match the requested topology: {0}")]
    TopologyMismatch(String),

    /// Norm evaluation stopped before reaching the gap tolerance.
    /// The payload is the best iterate found.
    #[error("norm evaluation did not converge: gap {gap:.3e} after {iterations} sweeps", gap = .0.gap, iterations = .0.iterations)]
    NormNotConverged(Box<NormResult>),

    /// The solver stopped before meeting its optimality tolerance.
    /// The payload is the best iterate found.
    #[error("solver did not converge: max violation {resid:.3e} after {iters} sweeps", resid = .0.kkt_residual, iters = .0.iterations)]
    FitNotConverged(Box<FitResult>),

    /// A group whose design columns are identically zero was forced into
    /// the active set, so no step size exists for its block.
    #[error("design columns for group {group} are all zero")]
    DegenerateDesign { group: usize },

    /// The covariance restricted to the weak support is numerically singular.
    #[error("covariance block on the weak support is singular")]
    SingularCovariance,

    /// Results on different regularization grids cannot be aggregated.
    #[error("regularization grids do not match: {0}")]
    GridMismatch(String),

    /// Weight-per-size maps must cover sizes 1..=k_max without holes.
    #[error("no weight given for group size {0}")]
    MissingSize(usize),

    /// Catch-all for malformed parameters; `name` is the offending field.
    #[error("invalid value for `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Convenience constructor for parameter validation failures.
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
