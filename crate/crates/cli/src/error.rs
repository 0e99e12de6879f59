use sampen_core::Error as CoreError;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_INFEASIBLE: u8 = 4;

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let code = match &e {
            CoreError::InvalidParameter(_) | CoreError::NonStationaryConfig(_) | CoreError::InvalidP(_) => {
                EXIT_USAGE
            }
            CoreError::Data(_)
            | CoreError::ZeroVariance
            | CoreError::TooShort { .. }
            | CoreError::SignalTooShort { .. }
            | CoreError::EmptySurvivorSet
            | CoreError::EmptyGroup
            | CoreError::InsufficientDefined => EXIT_DATA,
            CoreError::UndefinedEntropy
            | CoreError::Infeasible
            | CoreError::EmptyHistory
            | CoreError::AllTrialsInfeasible
            | CoreError::NoFeasibleRadius
            | CoreError::NoKnee
            | CoreError::SingularDesign => EXIT_INFEASIBLE,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::data(format!("I/O error: {e}"))
    }
}
