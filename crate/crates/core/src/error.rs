use std::path::PathBuf;

/// Errors raised anywhere in the discretization pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, message: String },
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("facet {facet}: no non-degenerate support simplex among {candidates} candidate cells")]
    DegenerateStencil { facet: usize, candidates: usize },
    #[error("singular barycentric system")]
    SingularSimplex,
    #[error("boundary facet {facet} has no tag")]
    UntaggedFacet { facet: usize },
    #[error("boundary tag `{0}` has no boundary condition")]
    UncoveredTag(String),
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("linear solve failed: {0}")]
    Solve(String),
    #[error("krylov solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("time step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("case `{case}`: {source}")]
    Case {
        case: String,
        #[source]
        source: Box<Error>,
    },
    #[error("{0}")]
    Other(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: Option<usize>, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }
}
