//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parameter `{name}` is not finite: {value}")]
    NonFiniteParameter { name: String, value: f64 },
    #[error("parameter `{name}` = {value} is outside its support")]
    OutOfSupport { name: String, value: f64 },
    #[error("dataset shape does not match model `{model}`: {detail}")]
    ShapeMismatch { model: String, detail: String },
    #[error("non-finite input: {0}")]
    NonFiniteInput(String),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

#[derive(Debug, Error)]
pub enum OdeError {
    #[error("step size must be positive, got {0}")]
    BadStep(f64),
    #[error("output grid must be strictly increasing")]
    GridNotIncreasing,
    #[error("grid point {t} is not an integer multiple of step {h} from t0")]
    GridOffStep { t: f64, h: f64 },
    #[error("integration failed at t = {t}: state left the valid region")]
    IntegrationFailure { t: f64 },
}

#[derive(Debug, Error)]
pub enum CsvError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: expected header `{expected}`, found `{found}`")]
    BadHeader {
        path: String,
        line: usize,
        expected: String,
        found: String,
    },
    #[error("{path}:{line}: malformed row: {detail}")]
    BadRow {
        path: String,
        line: usize,
        detail: String,
    },
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("log density is not finite at a finite-difference probe (coordinate {coordinate})")]
    NonFiniteProbe { coordinate: usize },
    #[error("could not find a finite-density initial point after {attempts} attempts")]
    InitializationFailed { attempts: usize },
    #[error("every warmup transition diverged; the step size could not be adapted")]
    AllDivergent,
    #[error("draw matrix is degenerate: {0}")]
    DegenerateDraws(String),
    #[error("need at least {need} draws, got {got}")]
    TooFewDraws { need: usize, got: usize },
    #[error("thinning target {target} exceeds available draws {available}")]
    ThinTargetTooLarge { target: usize, available: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("campaign must have at least one iteration")]
    NoIterations,
    #[error("every iteration failed; first cause: {0}")]
    AllIterationsFailed(String),
    #[error(
        "base posterior is not trustworthy: {reason}; increase the sampler draw budget \
         (need effective sample size >= {need})"
    )]
    BasePosteriorUnreliable { reason: String, need: usize },
    #[error("non-finite test-quantity value ({0})")]
    NonFiniteQuantity(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Debug, Error)]
pub enum UniformityError {
    #[error("rank {rank} is outside [0, {s}]")]
    RankOutOfRange { rank: i64, s: usize },
    #[error("need at least one rank")]
    Empty,
    #[error("PIT value {0} is on the boundary; map ranks to the open interval first")]
    BoundaryPit(f64),
    #[error("curve and envelope were built for different settings: {0}")]
    GridMismatch(String),
    #[error("coverage must be in (0.5, 1), got {0}")]
    BadCoverage(f64),
}
