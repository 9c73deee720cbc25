use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("profile radius is non-positive at theta = {theta:.6} (rho = {rho:.6e})")]
    NonPositiveRadius { theta: f64, rho: f64 },

    #[error("profile is not star-shaped: x.N = {x_dot_n:.3e} at theta = {theta:.6}")]
    NonStarShaped { theta: f64, x_dot_n: f64 },

    #[error("invalid profile: {0}")]
    BadProfile(String),

    #[error("grid half-width {half_width} does not cover the obstacle (R = {r_outer})")]
    GridTooSmall { half_width: f64, r_outer: f64 },

    #[error("invalid grid: {0}")]
    BadGrid(String),

    #[error("CFL number {lambda:.4} exceeds the 2D stability bound 1/sqrt(2)")]
    CflViolation { lambda: f64 },

    #[error("non-finite field value at t = {t:.4}")]
    NonFinite { t: f64 },

    #[error("exponent p = {p} must exceed 1")]
    BadP { p: f64 },

    #[error("data support radius {support:.3} plus horizon {horizon:.3} exceeds box half-width {half_width:.3}")]
    SupportTooLarge {
        support: f64,
        horizon: f64,
        half_width: f64,
    },

    #[error("weighted energy order k = {0} is not supported (k must be 0 or 1)")]
    UnsupportedK(u32),

    #[error("invalid exponent: {0}")]
    BadExponent(String),

    #[error("no snapshot at t = {0}")]
    MissingSnapshot(f64),

    #[error("need at least 5 points in the fit window, found {0}")]
    InsufficientData(usize),

    #[error("fit window contains a non-positive value or time")]
    NonPositiveValues,

    #[error("field evaluated outside its domain: {0}")]
    DomainViolation(String),

    #[error("quadrature under-resolved: relative change {rel_change:.3e} under doubling")]
    QuadratureUnderresolved { rel_change: f64 },

    #[error("flux regime requires t + R >= r (t = {t}, r = {r}, R = {r_shift})")]
    RegimeViolation { t: f64, r: f64, r_shift: f64 },

    #[error("snapshot spacing {spacing:.4e} too coarse for time differencing (dt = {dt:.4e})")]
    SnapshotSpacingTooCoarse { spacing: f64, dt: f64 },

    #[error("field {0} has no closed-form divergence")]
    UnsupportedField(String),

    #[error("operator has no exterior unknowns")]
    EmptyExterior,

    #[error("Lanczos iteration failed to converge: {0}")]
    ConvergenceFailure(String),

    #[error("invalid configuration: {0}")]
    ConfigInvalid(String),

    #[error("missing artifacts: {0}")]
    MissingArtifacts(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
