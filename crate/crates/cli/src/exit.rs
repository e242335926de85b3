use std::fmt;

use lwgcn::Error;

/// Simulator output that disagreed with the integer oracle.
#[derive(Debug)]
pub struct VerificationFailed;

impl fmt::Display for VerificationFailed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("simulator output differs from the integer oracle")
    }
}

impl std::error::Error for VerificationFailed {}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitCategory {
    Other = 1,
    Usage = 2,
    Input = 3,
    Config = 4,
    Data = 5,
    Simulation = 6,
    Verification = 7,
}

impl ExitCategory {
    pub fn label(self) -> &'static str {
        match self {
            ExitCategory::Other => "error",
            ExitCategory::Usage => "usage error",
            ExitCategory::Input => "input error",
            ExitCategory::Config => "configuration error",
            ExitCategory::Data => "data error",
            ExitCategory::Simulation => "simulation error",
            ExitCategory::Verification => "verification failure",
        }
    }
}

fn categorize(e: &Error) -> ExitCategory {
    match e {
        Error::Parse { .. } | Error::Stream(_) | Error::Json(_) | Error::Io(_) => ExitCategory::Input,
        Error::InvalidConfig(_) | Error::InvalidFormat(_) => ExitCategory::Config,
        Error::DimensionMismatch { .. }
        | Error::InvalidMatrix(_)
        | Error::ValueOutOfRange { .. }
        | Error::Infeasible(_) => ExitCategory::Data,
        Error::Overflow { .. }
        | Error::Arbitration { .. }
        | Error::ScheduleMismatch(_)
        | Error::ColumnOutOfRange { .. } => ExitCategory::Simulation,
    }
}

/// Category of the first recognizable error in the chain.
pub fn category(err: &anyhow::Error) -> ExitCategory {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return categorize(e);
        }
        if cause.is::<VerificationFailed>() {
            return ExitCategory::Verification;
        }
        if cause.is::<toml::de::Error>() {
            return ExitCategory::Config;
        }
        if cause.is::<serde_json::Error>() || cause.is::<std::io::Error>() {
            return ExitCategory::Input;
        }
    }
    ExitCategory::Other
}

pub fn exit_code(err: &anyhow::Error) -> u8 {
    category(err) as u8
}
