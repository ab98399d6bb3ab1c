use thiserror::Error;

/// Location of a failure inside the model: regime (1-based in messages),
/// time and, for jump terms, the atom index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Site {
    pub regime: usize,
    pub t: f64,
    pub atom: Option<usize>,
}

impl Site {
    pub fn new(regime: usize, t: f64) -> Self {
        Self { regime, t, atom: None }
    }

    pub fn with_atom(regime: usize, t: f64, atom: usize) -> Self {
        Self { regime, t, atom: Some(atom) }
    }
}

impl std::fmt::Display for Site {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(i={}, t={}", self.regime + 1, self.t)?;
        if let Some(a) = self.atom {
            write!(f, ", z=atom#{a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("model: dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("model: generator row {row} is not conservative (row sum {sum:e})")]
    NonConservativeGenerator { row: usize, sum: f64 },

    #[error("model: generator entry q[{row}][{col}] = {value} is a negative off-diagonal rate")]
    NegativeRate { row: usize, col: usize, value: f64 },

    #[error("model: negative weight {what} = {value} at {site}")]
    NegativeWeight { what: String, value: f64, site: Site },

    #[error("model: {what} violates its definiteness bound (min eigenvalue {min_eig:e}, required {bound:e}) at {site}")]
    DefinitenessFailure {
        what: String,
        min_eig: f64,
        bound: f64,
        site: Site,
    },

    #[error("model: invalid configuration: {0}")]
    Config(String),

    #[error("hamiltonians: no convergence for H{which} after {iterations} iterations (residual {residual:e}) at {site}")]
    NoConvergence {
        which: u8,
        iterations: usize,
        residual: f64,
        site: Site,
    },

    #[error("hamiltonians: weight P+Gamma = {value:e} is negative beyond the clamp tolerance at {site}")]
    NegativeHamiltonianWeight { value: f64, site: Site },

    #[error("riccati: R1 + P*D'D lost positive definiteness (min eigenvalue {min_eig:e}) at node {node} {site}")]
    DefinitenessLost {
        node: usize,
        min_eig: f64,
        site: Site,
    },

    #[error("riccati: P{component} = {value:e} below the -1e-10 clamp tolerance at node {node} {site}; grid too coarse")]
    NegativeP {
        component: u8,
        value: f64,
        node: usize,
        site: Site,
    },

    #[error("riccati: lower bound requested but no singular case is declared")]
    NotSingular,

    #[error("feedback: time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("sim: path {path_id} exploded (|X| = {value:e}) at step {step}, t = {t}")]
    ExplodedPath {
        path_id: u64,
        step: usize,
        t: f64,
        value: f64,
    },

    #[error("sim: {exploded} of {n_paths} paths exploded (limit 0.1%)")]
    TooManyExploded { exploded: u64, n_paths: u64 },

    #[error("sim: verification failed: {0}")]
    VerificationFailed(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("config: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Outcome class used by the CLI exit-code contract.
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::DimensionMismatch { .. }
            | Error::NonConservativeGenerator { .. }
            | Error::NegativeRate { .. }
            | Error::NegativeWeight { .. }
            | Error::DefinitenessFailure { .. }
            | Error::Config(_)
            | Error::Io(_)
            | Error::Json(_) => ErrorClass::Validation,
            Error::VerificationFailed(_) => ErrorClass::Verification,
            _ => ErrorClass::Solver,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Solver,
    Verification,
}

pub type Result<T> = std::result::Result<T, Error>;
