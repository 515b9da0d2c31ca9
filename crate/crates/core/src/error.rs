use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("degenerate {dim}-simplex {id} (volume {volume:e})")]
    DegenerateSimplex { dim: usize, id: usize, volume: f64 },

    #[error("point {point:?} lies outside the chart of {space}")]
    OutsideChart { space: String, point: Vec<f64> },

    #[error("degree mismatch: expected {expected}, got {got}")]
    DegreeMismatch { expected: usize, got: usize },

    #[error("cochain belongs to a different mesh")]
    MeshMismatch,

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { solver: &'static str, iterations: usize, residual: f64 },

    #[error("eigensolver did not converge; Ritz residuals {residuals:?}")]
    EigenNoConvergence { residuals: Vec<f64> },

    #[error("no clear spectral gap separating the kernel; eigenvalue estimates {eigenvalues:?}")]
    SpectralGapAmbiguous { eigenvalues: Vec<f64> },

    #[error("zero form has no mean-value ratio")]
    ZeroForm,

    #[error("critical value bracket never established over k in [{lo}, {hi}]")]
    NoBracket { lo: f64, hi: f64 },

    #[error("resource budget exceeded: order {order} needs {cells} cells, budget is {budget}")]
    ResourceBudget { order: usize, cells: usize, budget: usize },

    #[error("trajectory too short: horizon {horizon} below required {required}")]
    HorizonTooShort { horizon: f64, required: f64 },

    #[error("curvature {0} is not below 1; no quasigeodesic guarantee")]
    CurvatureTooLarge(f64),

    #[error("ideal endpoints did not stabilize (drift {drift:e})")]
    EndpointsUnstable { drift: f64 },

    #[error("sample spacing {spacing} too coarse for the curvature stencil")]
    SamplingTooCoarse { spacing: f64 },

    #[error("cycle is not null-homologous: pairing with harmonic form {index} is {pairing:e}")]
    NotNullHomologous { index: usize, pairing: f64 },

    #[error("chain boundary does not match the cycle (defect {0:e})")]
    BoundaryMismatch(f64),

    #[error("bound violated: {0}")]
    BoundViolation(String),

    #[error("empty loop family")]
    EmptyFamily,

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("config error at line {line}, column {column}: {message}")]
    Config { line: usize, column: usize, message: String },

    #[error("scenario {scenario}: analysis `{analysis}` requires {missing}")]
    MissingDependency { scenario: String, analysis: String, missing: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable variant name for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidMesh(_) => "invalid_mesh",
            Error::DegenerateSimplex { .. } => "degenerate_simplex",
            Error::OutsideChart { .. } => "outside_chart",
            Error::DegreeMismatch { .. } => "degree_mismatch",
            Error::MeshMismatch => "mesh_mismatch",
            Error::NoConvergence { .. } => "no_convergence",
            Error::EigenNoConvergence { .. } => "eigen_no_convergence",
            Error::SpectralGapAmbiguous { .. } => "spectral_gap_ambiguous",
            Error::ZeroForm => "zero_form",
            Error::NoBracket { .. } => "no_bracket",
            Error::ResourceBudget { .. } => "resource_budget",
            Error::HorizonTooShort { .. } => "horizon_too_short",
            Error::CurvatureTooLarge(_) => "curvature_too_large",
            Error::EndpointsUnstable { .. } => "endpoints_unstable",
            Error::SamplingTooCoarse { .. } => "sampling_too_coarse",
            Error::NotNullHomologous { .. } => "not_null_homologous",
            Error::BoundaryMismatch(_) => "boundary_mismatch",
            Error::BoundViolation(_) => "bound_violation",
            Error::EmptyFamily => "empty_family",
            Error::NonFinite(_) => "non_finite",
            Error::Unsupported(_) => "unsupported",
            Error::Config { .. } => "config",
            Error::MissingDependency { .. } => "missing_dependency",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
