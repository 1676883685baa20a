use alloc::string::String;

use crate::instance::TaskId;
use crate::value::ExactValue;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the library reports.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Error {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid allocation: {0}")]
    InvalidAllocation(String),

    /// Enumeration would exceed the configured cap.
    #[error("instance too large: {assignments} assignments exceed cap {cap}")]
    InstanceTooLarge {
        /// Number of assignments the enumeration would visit (saturating).
        assignments: u128,
        cap: u128,
    },

    #[error("invalid mechanism spec: {0}")]
    InvalidSpec(String),

    #[error("unsupported for this mechanism variant: {0}")]
    UnsupportedVariant(String),

    /// A critical-value payment is infinite.
    #[error("payment for task {task} is unbounded")]
    UnboundedPayment { task: TaskId },

    #[error("bad deviation: {0}")]
    BadDeviation(String),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    /// Pilot probes contradict a monotone threshold.
    #[error("not monotone: {0}")]
    NotMonotone(String),

    /// The probed side keeps the task all the way to the search cap.
    #[error("task {task} stays on the probed side up to cap {cap}")]
    Unbounded { task: TaskId, cap: ExactValue },

    #[error("probe resolution too coarse: {0}")]
    ResolutionTooCoarse(String),

    #[error("delta {delta} is not below the smallest threshold {min_threshold}")]
    DeltaTooLarge {
        delta: ExactValue,
        min_threshold: ExactValue,
    },

    #[error("grid of {points} points exceeds probe budget {budget}")]
    GridTooFine { points: u64, budget: u64 },

    #[error("shift makes the root value of task {task} negative ({value})")]
    NegativeValue { task: TaskId, value: ExactValue },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no nice star: {0}")]
    NoNiceStar(String),

    #[error("insufficient multiplicity: leaf {leaf} has {found} qualifying edges, need {needed}")]
    InsufficientMultiplicity {
        leaf: usize,
        found: usize,
        needed: usize,
    },

    /// A selected star failed the nice-star test it was chosen to pass.
    #[error("certificate mismatch: {0}")]
    CertificateMismatch(String),

    #[error("no box star found within budget {budget}")]
    BoxNotFound { budget: u64 },

    /// A boundary value keeps looking discontinuous after every resample.
    #[error("task {task} still discontinuous after {attempts} resamples")]
    PersistentDiscontinuity { task: TaskId, attempts: u32 },

    #[error("assertion failed: {0}")]
    AssertionFailed(String),
}
