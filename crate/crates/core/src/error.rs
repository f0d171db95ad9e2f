use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure mode of the library, from expression syntax to numerics.
///
/// Numeric payloads are carried as `f64` regardless of the scalar the caller
/// works in; they are diagnostic only.
#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("unbound variable `{name}`")]
    UnboundVariable { name: String },

    #[error("domain error in `{expr}`: {message}")]
    Domain { expr: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("orientation violation at {location}: det dPhi = {det}")]
    OrientationViolation { location: String, det: f64 },

    #[error("degenerate parametrization: {0}")]
    Degenerate(String),

    #[error("Newton iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("singular Jacobian")]
    SingularJacobian,

    #[error("point outside parameter domain: {0}")]
    OutOfDomain(String),

    #[error("family rejected: {0}")]
    Rejected(String),

    #[error("flow left the leaf range before the target arc length (reached s = {reached})")]
    FlowTruncated { reached: f64 },

    #[error("t = {t} outside tabulated range [{lo}, {hi}]")]
    OutsideTable { t: f64, lo: f64, hi: f64 },

    #[error("quadrature failure: {0}")]
    Quadrature(String),

    #[error("degenerate sample set: {0}")]
    DegenerateSamples(String),

    #[error("sample at {location}: {source}")]
    Sample {
        location: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the grid location it occurred at.
    pub fn at_sample(self, location: String) -> Error {
        Error::Sample {
            location,
            source: Box::new(self),
        }
    }
}
