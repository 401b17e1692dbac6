use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("state space mismatch in {0}")]
    SpaceMismatch(&'static str),

    #[error("invalid state space: {0}")]
    InvalidSpace(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    Length { expected: usize, got: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("{what} must be positive (index {index}, value {value})")]
    NonPositive {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("{what} has a negative entry at index {index} ({value})")]
    Negative {
        what: &'static str,
        index: usize,
        value: f64,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("set K is empty")]
    EmptySet,

    #[error("operator annihilates the start vector")]
    ZeroOperator,

    #[error(
        "power iteration did not converge after {iterations} iterations \
         (right residual {right:e}, left residual {left:e})"
    )]
    NotConverged {
        iterations: usize,
        right: f64,
        left: f64,
        /// `(right, left)` residual per iteration.
        history: Vec<(f64, f64)>,
    },

    #[error("series construction failed: {0}")]
    DivergentSeries(String),

    #[error(
        "grid too narrow: {leak:e} of the Gaussian step mass escapes the grid from point {index}"
    )]
    GridTooNarrow { leak: f64, index: usize },

    #[error(
        "generator has a negative off-diagonal rate at node {node} (h = {h}, |drift| = {drift}); \
         use h <= {suggested_h}"
    )]
    PositivityViolated {
        node: usize,
        h: f64,
        drift: f64,
        suggested_h: f64,
    },

    #[error("inconsistent family: P({s}) P({t}) differs from P({sum}) by {residual:e}")]
    InconsistentFamily {
        s: f64,
        t: f64,
        sum: f64,
        residual: f64,
    },

    #[error("{0}")]
    Analysis(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// IO error that names the file involved.
    pub fn io_at(path: &std::path::Path, e: std::io::Error) -> Self {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("{}: {e}", path.display()),
        ))
    }

    pub(crate) fn stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// True when the error is a negative scientific answer (a check or
    /// construction that did not go through) rather than misuse or IO.
    pub fn is_analysis_failure(&self) -> bool {
        match self {
            Error::NotConverged { .. }
            | Error::ZeroOperator
            | Error::DivergentSeries(_)
            | Error::Analysis(_)
            | Error::EmptySet => true,
            Error::Stage { source, .. } => source.is_analysis_failure(),
            _ => false,
        }
    }
}
