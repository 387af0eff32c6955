use num_complex::Complex64;

use crate::symexpr::{EvalError, ParseError};

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(#[from] ParseError),
    #[error("in {location}: {source}")]
    ParseAt {
        location: String,
        source: ParseError,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid jet variable: {0}")]
    InvalidJet(String),
    #[error("invalid characteristic: {0}")]
    InvalidCharacteristic(String),
    #[error("family parameter `{0}` is not allowed in jet calculus")]
    ParameterInJetCalculus(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("singular matrix (|det| = {det:e})")]
    SingularMatrix { det: f64 },
    #[error("spectral parameter {0} is singular for this model")]
    SingularLambda(Complex64),
    #[error("wavefunction blow-up at node ({0}, {1})")]
    BlowUp(usize, usize),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("matrix is not in the Lie algebra (defect {0:e})")]
    NotInAlgebra(f64),
    #[error("model configuration: {0}")]
    Config(String),
    #[error("binding `{binding}` failed its load-time check: residual {residual:e} at {point}")]
    BindingCheck {
        binding: String,
        point: String,
        residual: f64,
    },
    #[error("zero-curvature residual depends on lambda (spread {spread:e})")]
    LambdaDependence { spread: f64 },
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("no binding for characteristic `{characteristic}` on solution `{solution}`")]
    MissingBinding {
        characteristic: String,
        solution: String,
    },
    #[error("invalid immersion spec: {0}")]
    ImmersionSpec(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
