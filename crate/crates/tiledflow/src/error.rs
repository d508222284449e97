//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised while parsing or validating kernels.
#[derive(Debug, Error)]
pub enum FrontendError {
    /// Malformed input in the declared format.
    #[error("parse error at {line}:{col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    /// Syntactically valid input using a construct outside the supported
    /// affine subset (non-constant bounds, indirections, non-affine indices).
    #[error("unsupported construct: {0}")]
    UnsupportedConstruct(String),
    /// Structurally inconsistent kernel (bad references, arity mismatches).
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
}

/// Errors raised while building or fusing the task graph.
#[derive(Debug, Error)]
pub enum GraphError {
    #[error("inter-task dependences form a cycle involving {0}")]
    CyclicGraph(String),
}

/// Errors raised by design-space operations.
#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("no joint permutation satisfies the shared-loop constraint for fused task {0}")]
    EmptyPermutationSet(usize),
    #[error("design space has an estimated {estimated} points, more than the limit {limit}")]
    SpaceTooLarge { estimated: u128, limit: u64 },
    #[error("design point violates a structural invariant: {0}")]
    InvariantViolation(String),
    #[error("design point JSON does not match the schema: {0}")]
    Schema(String),
}

/// Errors raised by the search driver.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no design point satisfies the resource constraints")]
    Infeasible,
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// Errors raised by the discrete-event simulator.
#[derive(Debug, Error)]
pub enum SimError {
    #[error("simulation exceeded {0} cycles; likely deadlock (undersized FIFO?)")]
    Watchdog(u64),
    #[error("design point is not executable: {0}")]
    InvalidPoint(String),
    #[error("trace was not recorded; rerun with trace enabled")]
    MissingTrace,
}

/// Errors raised by the code generator.
#[derive(Debug, Error)]
pub enum CodegenError {
    #[error("design point is not emittable: {0}")]
    InvalidPoint(String),
}
