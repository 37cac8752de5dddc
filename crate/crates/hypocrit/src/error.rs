use thiserror::Error;

/// Error taxonomy shared across the workspace. The CLI maps these onto its
/// exit codes: input/domain/unsupported → 2, numeric → 3, inconsistent → 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or mutually incompatible inputs.
    #[error("input: {0}")]
    Input(String),

    /// Mathematically invalid request (divergent integral, k below the
    /// trace-class threshold, wrong dimension for a closed form).
    #[error("domain: {0}")]
    Domain(String),

    /// A numeric procedure failed to converge within its budget.
    #[error("numeric: {0}")]
    Numeric(String),

    /// Independent computation routes disagree beyond combined error bars.
    #[error("inconsistent routes: {0}")]
    InconsistentRoutes(String),

    /// Valid request outside the implemented envelope (e.g. the direct
    /// phase-space oracle above n = 2).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Violated internal invariant; indicates a bug, not bad input.
    #[error("internal: {0}")]
    Internal(String),
}
