use thiserror::Error;

/// Errors raised by the laboratory. Variants follow the failure modes of the
/// individual operations so callers (and the CLI) can report a stable reason.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parse error at {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("derivative order {requested} unreachable (analytic {analytic}, finite-difference {fd})")]
    OrderUnreachable {
        requested: usize,
        analytic: usize,
        fd: usize,
    },
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty list")]
    EmptyList,
    #[error("point {point:?} outside evaluation domain")]
    OutsideDomain { point: Vec<f64> },
    #[error("grid too short: {len} < {min}")]
    GridTooShort { len: usize, min: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("generalized point is not compactly supported")]
    NotCompactlySupported,
    #[error("point outside atlas")]
    PointOutsideAtlas,
    #[error("atlas has no metric")]
    NoMetric,
    #[error("ball escapes chart {chart}")]
    BallEscapesChart { chart: usize },
    #[error("support escapes chart {chart}")]
    SupportEscapesChart { chart: usize },
    #[error("cover gap at {point:?}")]
    CoverGap { point: Vec<f64> },
    #[error("image escapes atlas at eps={eps}")]
    ImageEscapesAtlas { eps: f64 },
    #[error("net `{0}` is not c-bounded")]
    NotCBounded(String),
    #[error("net `{0}` is not moderate")]
    NotModerate(String),
    #[error("inconsistent tests: {0}")]
    InconsistentTests(String),
    #[error("generalized point leaves its support at eps={eps}")]
    SupportEscapes { eps: f64 },
    #[error("atlas mismatch: {0}")]
    AtlasMismatch(String),
    #[error("jets unavailable: {0}")]
    JetsUnavailable(String),
    #[error("no admissible cover radius")]
    NoRadius,
    #[error("alignment threshold not reached on the grid")]
    ThresholdNotReached,
    #[error("alignment failed: {0}")]
    AlignmentFailed(String),
    #[error("fields are not aligned over a common base representative")]
    NotAligned,
    #[error("quadrature did not converge on [{a}, {b}]")]
    QuadratureNonconvergence { a: f64, b: f64 },
    #[error("divergent pairing for density `{0}`")]
    DivergentPairing(String),
    #[error("inconsistent routes: {0}")]
    InconsistentRoutes(String),
    #[error("step size underflow at u={at}")]
    StepUnderflow { at: f64 },
    #[error("solution blow-up at u={at}")]
    BlowUp { at: f64 },
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
