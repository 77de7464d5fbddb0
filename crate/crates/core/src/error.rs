use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported dimension {0} (expected 2, 3 or 4)")]
    UnsupportedDimension(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("degenerate simplex {0}")]
    DegenerateSimplex(usize),
    #[error("mesh corruption: {0}")]
    MeshCorruption(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("no quadrature rule of order {order} in dimension {dim}")]
    UnsupportedQuadrature { dim: usize, order: usize },
    #[error("zero pivot in row {0}")]
    ZeroPivot(usize),
    #[error("singular matrix (pivot column {0})")]
    SingularMatrix(usize),
    #[error("operator is not positive definite (curvature {0:e})")]
    NotPositiveDefinite(f64),
    #[error("solver did not converge: {0}")]
    NotConverged(String),
    #[error("point outside the space-time cylinder")]
    PointOutside,
    #[error("{}", format_config_errors(.0))]
    Config(Vec<ConfigIssue>),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// One problem found while parsing an experiment config.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

fn format_config_errors(issues: &[ConfigIssue]) -> String {
    let lines: Vec<String> = issues.iter().map(|i| i.to_string()).collect();
    format!("invalid config:\n  {}", lines.join("\n  "))
}
