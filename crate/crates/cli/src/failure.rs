use std::fmt;
use std::process::ExitCode;

use esig_core::Error;

/// Exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// Bad flags, configs or unreadable inputs.
    Usage,
    /// Inputs that parse but cannot support the requested operation.
    Data,
    /// A result that violates an internal invariant.
    Internal,
}

impl Kind {
    pub fn exit_code(self) -> ExitCode {
        ExitCode::from(match self {
            Kind::Usage => 2,
            Kind::Data => 3,
            Kind::Internal => 4,
        })
    }
}

#[derive(Debug)]
pub struct Failure {
    pub kind: Kind,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

fn kind_of(e: &Error) -> Kind {
    match e {
        Error::Config(_) | Error::StageMismatch { .. } | Error::Dimension { .. } | Error::Io(_) | Error::Json(_) => {
            Kind::Usage
        }
        Error::Data(_)
        | Error::MissingClasses(_)
        | Error::Stratification(_)
        | Error::InvalidLabel { .. }
        | Error::Csv(_) => Kind::Data,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            kind: kind_of(&e),
            error: e.into(),
        }
    }
}

pub fn usage(msg: impl fmt::Display) -> Failure {
    Failure {
        kind: Kind::Usage,
        error: anyhow::anyhow!("{msg}"),
    }
}

/// Attaches a kind and a context line to any error.
pub trait Classify<T> {
    fn or_usage(self, context: impl fmt::Display) -> Result<T, Failure>;
    fn or_internal(self, context: impl fmt::Display) -> Result<T, Failure>;
    /// Keeps the kind implied by the library error and adds context.
    fn context(self, context: impl fmt::Display) -> Result<T, Failure>;
}

impl<T> Classify<T> for Result<T, Error> {
    fn or_usage(self, context: impl fmt::Display) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            kind: Kind::Usage,
            error: anyhow::Error::new(e).context(context.to_string()),
        })
    }

    fn or_internal(self, context: impl fmt::Display) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            kind: Kind::Internal,
            error: anyhow::Error::new(e).context(context.to_string()),
        })
    }

    fn context(self, context: impl fmt::Display) -> Result<T, Failure> {
        self.map_err(|e| Failure {
            kind: kind_of(&e),
            error: anyhow::Error::new(e).context(context.to_string()),
        })
    }
}

impl<T> Classify<T> for std::io::Result<T> {
    fn or_usage(self, context: impl fmt::Display) -> Result<T, Failure> {
        self.map_err(Error::Io).or_usage(context)
    }

    fn or_internal(self, context: impl fmt::Display) -> Result<T, Failure> {
        self.map_err(Error::Io).or_internal(context)
    }

    fn context(self, context: impl fmt::Display) -> Result<T, Failure> {
        self.map_err(Error::Io).context(context)
    }
}
