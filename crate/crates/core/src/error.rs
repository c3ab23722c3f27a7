use thiserror::Error;

/// Errors raised by the library. Every variant is a precondition or
/// input-validation failure except `Io`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degree must be at least 1")]
    ZeroDegree,
    #[error("coefficient vectors must both have length {expected}, got {cos} and {sin}")]
    CoefficientLength {
        expected: usize,
        cos: usize,
        sin: usize,
    },
    #[error("coefficient {index} is not finite")]
    NonFiniteCoefficient { index: usize },
    #[error("grid size {k} too small for degree {n}: need at least {min}")]
    GridTooSmall { k: usize, n: usize, min: usize },
    #[error("malformed polynomial record: {0}")]
    Parse(String),
    #[error("unknown ensemble `{0}`")]
    UnknownEnsemble(String),
    #[error("invalid ensemble parameter: {0}")]
    EnsembleParameter(String),
    #[error("invalid domain: {0}")]
    Domain(String),
    #[error("evaluation budget {budget} below the minimum {min}")]
    BudgetTooSmall { budget: usize, min: usize },
    #[error("invalid bracket ({lo}, {hi}): endpoint values {flo} and {fhi} do not change sign")]
    InvalidBracket { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("points must be distinct on the torus (points {0} and {1} coincide)")]
    CoincidentPoints(usize, usize),
    #[error("no points given")]
    EmptyPoints,
    #[error("squared L2 norm {norm_sq} exceeds the declared bound {bound_sq}")]
    NormBound { norm_sq: f64, bound_sq: f64 },
    #[error("only {found} certified roots in the interval, {required} required")]
    TooFewRoots { found: usize, required: usize },
    #[error("root count in the interval could not be certified")]
    Uncertified,
    #[error("hypothesis fails at x = {x}: |f| = {value}, |f'| = {slope}")]
    HypothesisViolated { x: f64, value: f64, slope: f64 },
    #[error("hypothesis could not be certified near x = {x}")]
    HypothesisInconclusive { x: f64 },
    #[error("perturbation too large: sup |g| over the interval may reach {bound}, limit {limit}")]
    PerturbationTooLarge { bound: f64, limit: f64 },
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("classification has {0} undecided intervals")]
    Undecided(usize),
    #[error("covariance identity violated: {0}")]
    CovarianceDrift(String),
    #[error("record set is not homogeneous: {0}")]
    Heterogeneous(String),
    #[error("need at least {required} records, got {got}")]
    TooFewRecords { required: usize, got: usize },
    #[error("fast path disagreed with the certified audit on {disagreements} of {audited} trials")]
    AuditFailed { disagreements: usize, audited: usize },
    #[error("I/O failure{}: {source}", durable_note(*last_durable))]
    Io {
        last_durable: Option<u64>,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for errors caused by the environment rather than by bad input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}

fn durable_note(last: Option<u64>) -> String {
    match last {
        Some(t) => format!(" (trials up to {t} are on disk)"),
        None => String::new(),
    }
}

impl From<std::io::Error> for Error {
    fn from(source: std::io::Error) -> Self {
        Error::Io {
            last_durable: None,
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
