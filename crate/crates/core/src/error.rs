use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("signal has zero variance")]
    ZeroVariance,
    #[error("signal too short: need at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("signal too short for m = {m}: need at least {needed} samples, got {got}")]
    SignalTooShort { m: usize, needed: usize, got: usize },
    #[error("AR(1) coefficient |phi| = {0} must be < 1")]
    NonStationaryConfig(f64),
    #[error("sample entropy is undefined or degenerate at these parameters")]
    UndefinedEntropy,
    #[error("bootstrap estimate is infeasible (too many non-finite replicates)")]
    Infeasible,
    #[error("trial history is empty")]
    EmptyHistory,
    #[error("every trial was infeasible")]
    AllTrialsInfeasible,
    #[error("fewer than 3 grid radii produced a usable criterion")]
    NoFeasibleRadius,
    #[error("no knee point found")]
    NoKnee,
    #[error("p-value {0} outside [0, 1]")]
    InvalidP(f64),
    #[error("comparison group is empty")]
    EmptyGroup,
    #[error("regression design matrix is singular")]
    SingularDesign,
    #[error("no signal survived the stationarity filter")]
    EmptySurvivorSet,
    #[error("fewer than two defined entropy estimates")]
    InsufficientDefined,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("data error: {0}")]
    Data(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
