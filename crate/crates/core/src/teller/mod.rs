//! Terminal side of the protocol: a blocking client, scripted sessions for
//! tests and demos, and a text-mode ATM.

mod interactive;
mod script;
mod terminal;

use thiserror::Error;

use crate::wire::ResponseCode;

pub use interactive::{Prompter, ScriptedPrompter, TtyPrompter, run_interactive};
pub use script::{Action, Script, Step, load_fingerprint, response_code, run_script};
pub use terminal::{RecordingStream, Terminal, describe, mask_pan};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONNECT: i32 = 2;
pub const EXIT_SCRIPT: i32 = 3;
pub const EXIT_MISMATCH: i32 = 4;
pub const EXIT_LOST: i32 = 5;

#[derive(Debug, Error)]
pub enum TellerError {
    #[error("cannot connect to switch {0}")]
    Connect(String),
    #[error("script line {line}: {reason}")]
    Script { line: usize, reason: String },
    #[error("line {line}: expected {expected}, got {actual}")]
    Mismatch {
        line: usize,
        expected: ResponseCode,
        actual: ResponseCode,
    },
    #[error("connection lost: {0}")]
    Lost(String),
    #[error("invalid input: {0}")]
    Input(String),
}

impl TellerError {
    pub fn exit_code(&self) -> i32 {
        match self {
            TellerError::Connect(_) => EXIT_CONNECT,
            TellerError::Script { .. } | TellerError::Input(_) => EXIT_SCRIPT,
            TellerError::Mismatch { .. } => EXIT_MISMATCH,
            TellerError::Lost(_) => EXIT_LOST,
        }
    }
}
