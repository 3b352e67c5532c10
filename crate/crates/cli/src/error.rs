//! Command errors mapped onto process exit codes: 1 for validation
//! problems (bad flags, malformed or missing inputs, violated
//! preconditions), 2 for runtime and numeric failures.

use std::fmt;

use crate::format::FormatError;

#[derive(Debug)]
pub enum CmdError {
    Validation(String),
    Runtime(String),
}

impl CmdError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CmdError::Validation(_) => 1,
            CmdError::Runtime(_) => 2,
        }
    }
}

impl fmt::Display for CmdError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CmdError::Validation(m) | CmdError::Runtime(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CmdError {}

pub fn validation(e: impl fmt::Display) -> CmdError {
    CmdError::Validation(e.to_string())
}

pub fn runtime(e: impl fmt::Display) -> CmdError {
    CmdError::Runtime(e.to_string())
}

impl From<actpred_core::Error> for CmdError {
    fn from(e: actpred_core::Error) -> Self {
        match e {
            actpred_core::Error::NonFiniteLoss { .. }
            | actpred_core::Error::DegenerateOutput { .. } => runtime(e),
            _ => validation(e),
        }
    }
}

/// Read-side format problems are input validation.
pub fn read_err(e: FormatError) -> CmdError {
    validation(e)
}

/// Write-side problems (unwritable paths, full disks) are runtime.
pub fn write_err(e: FormatError) -> CmdError {
    runtime(e)
}
