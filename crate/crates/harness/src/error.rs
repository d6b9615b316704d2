use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),
    #[error("{0}")]
    Data(String),
    #[error("{context}: {source}")]
    Solver {
        context: String,
        #[source]
        source: snewton_core::Error,
    },
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0} verification check(s) failed")]
    VerificationFailed(usize),
    #[error("no grid value converged:\n  {}", .0.join("\n  "))]
    NoConvergentM(Vec<String>),
}

impl HarnessError {
    pub fn validation(msg: impl Into<String>) -> Self {
        HarnessError::Validation(vec![msg.into()])
    }

    pub fn solver(context: impl Into<String>, source: snewton_core::Error) -> Self {
        HarnessError::Solver {
            context: context.into(),
            source,
        }
    }

    /// 1 for invalid input, 2 for solver failures, 3 for failed checks.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) | HarnessError::Data(_) | HarnessError::Io(_) => 1,
            HarnessError::Solver { .. } | HarnessError::NoConvergentM(_) => 2,
            HarnessError::VerificationFailed(_) => 3,
        }
    }
}

/// Parameter errors raised while building problems are configuration
/// errors; everything else from the core is a solver failure.
impl From<snewton_core::Error> for HarnessError {
    fn from(e: snewton_core::Error) -> Self {
        match e {
            snewton_core::Error::InvalidParameter(msg) => HarnessError::Validation(vec![msg]),
            other => HarnessError::solver("setup", other),
        }
    }
}
