//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by series arithmetic, special functions, assembly and
/// the trace extraction.
#[derive(Debug, Error)]
pub enum Error {
    /// Two series whose leading powers differ by a non-integer amount were
    /// added; their power grids never line up.
    #[error("incompatible offset grid: offsets {0}/2 and {1}/2 differ by a non-integer")]
    IncompatibleOffsetGrid(i64, i64),

    /// Division by a series whose leading coefficient is zero.
    #[error("zero leading coefficient in series division")]
    ZeroLeadingCoefficient,

    /// The inner square root of a shifted-argument composition is not
    /// analytic at the expansion point.
    #[error("composition through sqrt(y0^2 + s^2 x^2) requires y0 > 0")]
    NonAnalyticComposition,

    /// A quantum-number or material-parameter precondition failed.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A boundary/material specification violates its invariants.
    #[error("invalid boundary specification: {0}")]
    InvalidSpec(String),

    /// The linear system (1 - M0) is singular or too ill-conditioned to
    /// solve at the working precision. Physically this signals the
    /// touching/contact regime.
    #[error("singular (1 - M0) block at m = {m}: condition estimate {condition:.3e}")]
    SingularBlock { m: i64, condition: f64 },

    /// The spectral radius of M(xi) is >= 1, so ln(1 - M) is undefined.
    #[error("spectral radius {radius:.6} >= 1 at m = {m} (contact regime)")]
    SpectralRadius { m: i64, radius: f64 },

    /// A series did not carry enough reliable orders for the requested
    /// coefficient extraction. Indicates an internal order-policy bug.
    #[error("insufficient series order: reliable through x^{have}/2, need x^{need}/2")]
    InsufficientOrder { have: i64, need: i64 },

    /// Negative powers survived balancing; indicates an offset bug in the
    /// scattering or translation series.
    #[error("balanced element has negative leading power {0}/2 (l={1}, l'={2}, m={3})")]
    UnbalancedElement(i64, i64, i64, i64),

    /// A least-squares fit was rank deficient.
    #[error("rank-deficient fit: {0}")]
    RankDeficientFit(String),

    /// A small-separation extraction was requested in a regime where the
    /// truncation does not converge.
    #[error("unreliable extraction: {0}")]
    UnreliableExtraction(String),
}

pub type Result<T> = std::result::Result<T, Error>;
